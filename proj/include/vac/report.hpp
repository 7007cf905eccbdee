#pragma once

#include <string>
#include <vector>

#include "vac/evaluation.hpp"

namespace vac {

// One comparison table: rows are systems, columns are runtime, one score per
// dataset, and the macro average. A dagger marks a column's best system when
// its advantage over the runner-up is significant (paired t-test, p < 0.05).
struct CompareTable {
    std::vector<std::string> dataset_names;
    struct Row {
        std::string system;
        double runtime_per_query_seconds = 0.0;
        std::vector<double> per_dataset;      // aligned with dataset_names
        std::vector<bool> significant;        // aligned with dataset_names
        double macro = 0.0;
        bool macro_significant = false;
    };
    std::vector<Row> rows;
};

// reports[s][d]: system s evaluated on dataset d. All systems must cover the
// same datasets in the same order.
CompareTable build_compare_table(const std::vector<std::string>& dataset_names,
                                 const std::vector<std::vector<EvalReport>>& reports,
                                 double significance_level = 0.05);

std::string render_table_plain(const CompareTable& table);
std::string render_table_markdown(const CompareTable& table);

json compare_table_to_json(const CompareTable& table);
CompareTable compare_table_from_json(const json& j);

}  // namespace vac
