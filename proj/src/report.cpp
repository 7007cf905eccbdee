#include "vac/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

namespace vac {

namespace {

std::string format_score(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", value);
    return buf;
}

std::string format_runtime(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", value);
    return buf;
}

// Paired scores of two reports over their shared valid examples.
std::pair<std::vector<double>, std::vector<double>> paired_scores(const EvalReport& a,
                                                                  const EvalReport& b) {
    std::map<std::string, double> b_means;
    for (const auto& s : b.per_example) {
        if (s.valid) b_means[s.example_id] = s.mean;
    }
    std::vector<double> xs, ys;
    for (const auto& s : a.per_example) {
        if (!s.valid) continue;
        auto it = b_means.find(s.example_id);
        if (it == b_means.end()) continue;
        xs.push_back(s.mean);
        ys.push_back(it->second);
    }
    return {xs, ys};
}

}  // namespace

CompareTable build_compare_table(const std::vector<std::string>& dataset_names,
                                 const std::vector<std::vector<EvalReport>>& reports,
                                 double significance_level) {
    const std::size_t n_systems = reports.size();
    const std::size_t n_datasets = dataset_names.size();
    for (const auto& row : reports) {
        if (row.size() != n_datasets) {
            throw VacError("build_compare_table: every system needs one report per dataset");
        }
    }

    CompareTable table;
    table.dataset_names = dataset_names;
    for (std::size_t s = 0; s < n_systems; ++s) {
        CompareTable::Row row;
        row.system = reports[s].empty() ? "" : reports[s][0].system_name;
        double runtime = 0.0;
        double macro = 0.0;
        for (std::size_t d = 0; d < n_datasets; ++d) {
            row.per_dataset.push_back(reports[s][d].macro_mean);
            row.significant.push_back(false);
            runtime += reports[s][d].runtime_per_query_seconds;
            macro += reports[s][d].macro_mean;
        }
        row.runtime_per_query_seconds = n_datasets == 0 ? 0.0 : runtime / n_datasets;
        row.macro = n_datasets == 0 ? 0.0 : macro / n_datasets;
        table.rows.push_back(std::move(row));
    }

    if (n_systems >= 2) {
        // Per dataset: best vs runner-up over shared examples.
        for (std::size_t d = 0; d < n_datasets; ++d) {
            std::size_t best = 0, second = 1;
            if (table.rows[second].per_dataset[d] > table.rows[best].per_dataset[d]) {
                std::swap(best, second);
            }
            for (std::size_t s = 2; s < n_systems; ++s) {
                if (table.rows[s].per_dataset[d] > table.rows[best].per_dataset[d]) {
                    second = best;
                    best = s;
                } else if (table.rows[s].per_dataset[d] > table.rows[second].per_dataset[d]) {
                    second = s;
                }
            }
            const auto [xs, ys] = paired_scores(reports[best][d], reports[second][d]);
            if (xs.size() >= 2 && paired_t_test(xs, ys) < significance_level) {
                table.rows[best].significant[d] = true;
            }
        }
        // Macro column: concatenate the per-dataset pairings.
        std::size_t best = 0, second = 1;
        if (table.rows[second].macro > table.rows[best].macro) std::swap(best, second);
        for (std::size_t s = 2; s < n_systems; ++s) {
            if (table.rows[s].macro > table.rows[best].macro) {
                second = best;
                best = s;
            } else if (table.rows[s].macro > table.rows[second].macro) {
                second = s;
            }
        }
        std::vector<double> xs, ys;
        for (std::size_t d = 0; d < n_datasets; ++d) {
            const auto [x, y] = paired_scores(reports[best][d], reports[second][d]);
            xs.insert(xs.end(), x.begin(), x.end());
            ys.insert(ys.end(), y.begin(), y.end());
        }
        if (xs.size() >= 2 && paired_t_test(xs, ys) < significance_level) {
            table.rows[best].macro_significant = true;
        }
    }
    return table;
}

namespace {

constexpr const char* kDagger = "\xe2\x80\xa0";  // †

std::vector<std::vector<std::string>> table_cells(const CompareTable& table) {
    std::vector<std::vector<std::string>> cells;
    std::vector<std::string> header = {"Method", "Runtime (second / query)"};
    for (const auto& name : table.dataset_names) header.push_back(name);
    header.push_back("Average (macro)");
    cells.push_back(std::move(header));

    for (const auto& row : table.rows) {
        std::vector<std::string> line = {row.system,
                                         format_runtime(row.runtime_per_query_seconds)};
        for (std::size_t d = 0; d < row.per_dataset.size(); ++d) {
            line.push_back(format_score(row.per_dataset[d]) +
                           (row.significant[d] ? kDagger : ""));
        }
        line.push_back(format_score(row.macro) + (row.macro_significant ? kDagger : ""));
        cells.push_back(std::move(line));
    }
    return cells;
}

// Codepoints, not bytes, so the dagger does not skew column alignment.
std::size_t display_width(const std::string& s) {
    std::size_t width = 0;
    for (unsigned char c : s) {
        if ((c & 0xc0) != 0x80) ++width;
    }
    return width;
}

}  // namespace

std::string render_table_plain(const CompareTable& table) {
    const auto cells = table_cells(table);
    std::vector<std::size_t> widths(cells[0].size(), 0);
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            widths[c] = std::max(widths[c], display_width(row[c]));
        }
    }
    std::string out;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        for (std::size_t c = 0; c < cells[r].size(); ++c) {
            out += cells[r][c];
            if (c + 1 < cells[r].size()) {
                out += std::string(widths[c] - display_width(cells[r][c]), ' ');
                out += "  ";
            }
        }
        out += '\n';
        if (r == 0) {
            for (std::size_t c = 0; c < widths.size(); ++c) {
                out += std::string(widths[c], '-');
                if (c + 1 < widths.size()) out += "  ";
            }
            out += '\n';
        }
    }
    out += std::string(kDagger) +
           " marks the best system per column when the gap to the runner-up is significant "
           "(paired t-test, p < 0.05)\n";
    return out;
}

std::string render_table_markdown(const CompareTable& table) {
    const auto cells = table_cells(table);
    std::string out;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        out += "|";
        for (const auto& cell : cells[r]) out += " " + cell + " |";
        out += '\n';
        if (r == 0) {
            out += "|";
            for (std::size_t c = 0; c < cells[0].size(); ++c) out += " --- |";
            out += '\n';
        }
    }
    return out;
}

json compare_table_to_json(const CompareTable& table) {
    json j;
    j["dataset_names"] = table.dataset_names;
    json rows = json::array();
    for (const auto& row : table.rows) {
        json r;
        r["system"] = row.system;
        r["runtime_per_query_seconds"] = row.runtime_per_query_seconds;
        r["per_dataset"] = row.per_dataset;
        r["significant"] = row.significant;
        r["macro"] = row.macro;
        r["macro_significant"] = row.macro_significant;
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    return j;
}

CompareTable compare_table_from_json(const json& j) {
    CompareTable table;
    table.dataset_names = j.at("dataset_names").get<std::vector<std::string>>();
    for (const auto& r : j.at("rows")) {
        CompareTable::Row row;
        row.system = r.at("system").get<std::string>();
        row.runtime_per_query_seconds = r.at("runtime_per_query_seconds").get<double>();
        row.per_dataset = r.at("per_dataset").get<std::vector<double>>();
        for (const auto& b : r.at("significant")) row.significant.push_back(b.get<bool>());
        row.macro = r.at("macro").get<double>();
        row.macro_significant = r.value("macro_significant", false);
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace vac
