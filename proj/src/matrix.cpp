#include "reveca/matrix.hpp"

#include <array>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <thread>

#include "reveca/errors.hpp"

namespace reveca {

using nlohmann::json;

namespace {

json settings_of(const RunConfig& c) {
    json j = c.to_json();
    return {{"flags", j.at("flags")},
            {"top_k", j.at("top_k")},
            {"ladder", c.ladder},
            {"dummy_count", c.dummy_count},
            {"agent_count", c.agent_count},
            {"horizon", c.horizon},
            {"tasks", c.task_list()},
            {"seeds", c.seeds}};
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

void write_transcript(const RunConfig& c, const EpisodeResult& r) {
    if (c.transcript_dir.empty()) return;
    std::filesystem::create_directories(c.transcript_dir);
    const auto file = std::filesystem::path(c.transcript_dir) / (c.label + "_" + r.task + "_" + std::to_string(r.seed) + ".jsonl");
    std::ofstream(file, std::ios::binary) << r.transcript;
}

}  // namespace

MatrixReport run_matrix(const std::vector<RunConfig>& configs, int workers,
                        std::function<std::shared_ptr<Reasoner>(const RunConfig&)> reasoner_for) {
    if (configs.empty()) throw ConfigError("matrix needs at least one config");
    if (workers < 1) throw ConfigError("workers must be >= 1");

    struct Job {
        std::size_t row;
        std::string task;
        unsigned long long seed;
    };
    std::vector<Job> jobs;
    std::vector<std::shared_ptr<Reasoner>> reasoners;
    MatrixReport report;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        configs[i].validate();
        reasoners.push_back(reasoner_for ? reasoner_for(configs[i]) : make_reasoner(configs[i]));
        const auto tasks = configs[i].task_list();
        report.episodes.emplace_back(tasks.size() * configs[i].seeds.size());
        for (const auto& t : tasks)
            for (auto s : configs[i].seeds) jobs.push_back({i, t, s});
    }

    std::vector<EpisodeResult> results(jobs.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
            const auto& job = jobs[j];
            try {
                results[j] = run_episode(configs[job.row], job.task, job.seed, reasoners[job.row]);
            } catch (const std::exception& e) {
                results[j].task = job.task;
                results[j].seed = job.seed;
                results[j].error = e.what();
            }
        }
    };
    const int n = std::min<int>(workers, static_cast<int>(jobs.size()));
    std::vector<std::thread> pool;
    for (int i = 1; i < n; ++i) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    // Single merge point: results keep the job order regardless of which thread ran them.
    std::vector<std::size_t> filled(configs.size(), 0);
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const auto row = jobs[j].row;
        write_transcript(configs[row], results[j]);
        report.episodes[row][filled[row]++] = std::move(results[j]);
    }
    for (std::size_t i = 0; i < configs.size(); ++i) {
        MatrixRow r;
        r.label = configs[i].label;
        r.settings = settings_of(configs[i]);
        double ss = 0, td = 0;
        for (const auto& e : report.episodes[i]) {
            ++r.episodes;
            if (e.error) {
                r.errors.push_back(e.task + " seed " + std::to_string(e.seed) + ": " + *e.error);
                continue;
            }
            if (e.metrics.success) ++r.successes;
            ss += e.metrics.simulation_steps;
            td += e.metrics.travel_distance;
        }
        if (r.errors.empty() && r.episodes > 0) {
            r.mean_ss = ss / r.episodes;
            r.mean_td = td / r.episodes;
            r.success_rate = static_cast<double>(r.successes) / r.episodes;
        }
        report.rows.push_back(std::move(r));
    }
    return report;
}

std::string MatrixReport::render_table() const {
    std::vector<std::array<std::string, 5>> cells{{"Method", "SS", "TD", "Success", "Episodes"}};
    for (const auto& r : rows) {
        if (!r.errors.empty()) {
            cells.push_back({r.label, "error", "error", "error", std::to_string(r.episodes)});
            continue;
        }
        cells.push_back({r.label, fixed(*r.mean_ss, 2), fixed(*r.mean_td, 2), fixed(*r.success_rate * 100, 1) + "%",
                         std::to_string(r.episodes)});
    }
    std::array<std::size_t, 5> width{};
    for (const auto& row : cells)
        for (std::size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], row[c].size());
    std::string out = "# TD is the mean per-agent travel distance in meters\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
        for (std::size_t c = 0; c < 5; ++c) {
            const auto& s = cells[i][c];
            if (c == 0) out += s + std::string(width[c] - s.size(), ' ');
            else out += "  " + std::string(width[c] - s.size(), ' ') + s;
        }
        out += '\n';
        if (i == 0) {
            std::size_t total = width[0];
            for (std::size_t c = 1; c < 5; ++c) total += width[c] + 2;
            out += std::string(total, '-') + '\n';
        }
    }
    for (const auto& r : rows)
        for (const auto& e : r.errors) out += "! " + r.label + ": " + e + '\n';
    return out;
}

json MatrixReport::to_json() const {
    json rs = json::array();
    for (const auto& r : rows) {
        auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
        rs.push_back({{"label", r.label},
                      {"settings", r.settings},
                      {"episodes", r.episodes},
                      {"successes", r.successes},
                      {"mean_ss", opt(r.mean_ss)},
                      {"mean_td", opt(r.mean_td)},
                      {"success_rate", opt(r.success_rate)},
                      {"errors", r.errors}});
    }
    return {{"td_aggregation", "mean over agents"}, {"rows", rs}};
}

MatrixReport MatrixReport::from_json(const json& j) {
    MatrixReport report;
    try {
        for (const auto& r : j.at("rows")) {
            MatrixRow row;
            row.label = r.at("label").get<std::string>();
            row.settings = r.at("settings");
            row.episodes = r.at("episodes").get<int>();
            row.successes = r.at("successes").get<int>();
            auto opt = [&](const char* key) -> std::optional<double> {
                if (r.at(key).is_null()) return std::nullopt;
                return r.at(key).get<double>();
            };
            row.mean_ss = opt("mean_ss");
            row.mean_td = opt("mean_td");
            row.success_rate = opt("success_rate");
            row.errors = r.at("errors").get<std::vector<std::string>>();
            report.rows.push_back(std::move(row));
        }
    } catch (const json::exception& e) {
        throw SchemaMismatch(std::string("bad matrix report: ") + e.what());
    }
    return report;
}

}  // namespace reveca
