#include <cstdio>
#include <fstream>

#include "reveca/errors.hpp"
#include "reveca/reasoner.hpp"

namespace reveca {

using nlohmann::json;

std::string prompt_hash(std::string_view rendered_prompt) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : rendered_prompt) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

std::map<std::string, std::string> load_entries(const std::filesystem::path& path) {
    std::map<std::string, std::string> entries;
    std::ifstream in(path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto j = json::parse(line);
            entries.emplace(j.at("prompt_hash").get<std::string>(), j.at("raw_text").get<std::string>());
        } catch (const json::exception& e) {
            throw SchemaMismatch(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return entries;
}

}  // namespace

FixtureReasoner::FixtureReasoner(std::filesystem::path path, std::shared_ptr<Reasoner> inner)
    : path_(std::move(path)), inner_(std::move(inner)), mode_(Mode::Record) {
    if (!inner_) throw ConfigError("record mode needs a backend to record");
    if (std::filesystem::exists(path_)) entries_ = load_entries(path_);
}

FixtureReasoner::FixtureReasoner(std::filesystem::path path) : path_(std::move(path)), mode_(Mode::Replay) {
    if (!std::filesystem::exists(path_)) throw ConfigError("fixture file not found: " + path_.string());
    entries_ = load_entries(path_);
}

std::size_t FixtureReasoner::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

void FixtureReasoner::append(const std::string& hash, const ReasonerRequest& request, const std::string& raw) {
    std::lock_guard lock(mu_);
    if (!entries_.emplace(hash, raw).second) return;
    std::ofstream out(path_, std::ios::app);
    out << json{{"prompt_hash", hash},
                {"kind", to_string(request.kind)},
                {"rendered_prompt", request.rendered_prompt},
                {"raw_text", raw}}
               .dump()
        << "\n";
}

ReasonerReply FixtureReasoner::answer(const ReasonerRequest& request) {
    const auto hash = prompt_hash(request.rendered_prompt);
    if (mode_ == Mode::Record) {
        try {
            auto reply = inner_->answer(request);
            append(hash, request, reply.raw_text);
            return reply;
        } catch (const ParseFailure& e) {
            // Keep the failing text so a replay fails the same way.
            append(hash, request, e.raw_text);
            throw;
        }
    }
    std::string raw;
    {
        std::lock_guard lock(mu_);
        auto it = entries_.find(hash);
        if (it == entries_.end())
            throw FixtureMiss("no fixture for " + std::string(to_string(request.kind)) + " prompt " + hash);
        raw = it->second;
    }
    ReasonerReply reply;
    reply.kind = request.kind;
    reply.raw_text = raw;
    reply.parsed = parse_reply(request, raw);
    return reply;
}

}  // namespace reveca
