#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fednb/error.hpp"

namespace fednb {

struct Row {
    std::uint64_t row_id;
    std::vector<double> values;
    std::string class_label;
};

// A relational table of numeric attributes plus one categorical class label.
// Row ids are unique and strictly increasing in storage order; every row has
// exactly one value per attribute.
struct Table {
    std::string name;
    std::string label_name = "label";
    std::vector<std::string> attribute_names;
    std::vector<Row> rows;

    std::size_t attribute_index(const std::string& attribute) const;
    std::vector<double> column(std::size_t attribute_idx) const;
    std::vector<std::string> labels() const;
    // Distinct class labels, lexicographically sorted.
    std::vector<std::string> distinct_labels() const;
};

// One vertical fragment: a disjoint subset of the parent's attributes, every
// row id, and the class label replicated per row.
struct PartitionedTable {
    std::uint32_t site_id;
    std::vector<std::string> attribute_names;
    std::vector<Row> rows;
};

struct SplitPlan {
    enum class Scheme { Holdout, KFold };

    std::uint64_t seed = 0;
    double train_fraction = 0.5;
    std::uint32_t repeats = 10;
    Scheme scheme = Scheme::Holdout;
    std::uint32_t folds = 10;  // KFold only

    // Total (train, test) pairs the plan generates.
    std::uint32_t split_count() const {
        return scheme == Scheme::KFold ? repeats * folds : repeats;
    }
};

struct Split {
    std::vector<std::uint64_t> train_ids;
    std::vector<std::uint64_t> test_ids;
};

// Label column choice: by header name or by zero-based column index.
using LabelSelector = std::variant<std::string, std::size_t>;

// Parses "3" as index 3, anything else as a column name.
LabelSelector parse_label_selector(const std::string& text);

// Reads a comma-separated file (header row, '.' decimal separator) into a
// Table. Row ids are assigned 0..n-1 in file order.
Table load_csv(const std::filesystem::path& path, const LabelSelector& label_column);

// Reads a fragment file written by write_fragment_csv: leading "row_id"
// column, attribute columns, label column last.
PartitionedTable load_fragment_csv(const std::filesystem::path& path, std::uint32_t site_id);
void write_fragment_csv(const PartitionedTable& fragment, const std::string& label_name,
                        const std::filesystem::path& path);

// Assigns attributes to sites as contiguous blocks in original order; block
// sizes differ by at most one, earlier sites take the extra attribute.
std::vector<PartitionedTable> partition_vertical(const Table& table, std::size_t num_sites);

// Joins fragments on row_id back into a single table. Throws ConsistencyError
// when row ids or labels disagree across fragments.
Table reassemble(std::span<const PartitionedTable> fragments);

// Deterministic in (plan.seed, repeat index): every holder of the same plan
// derives byte-identical splits. Splits index row positions 0..n_rows-1.
std::vector<Split> generate_splits(std::size_t n_rows, const SplitPlan& plan);

}  // namespace fednb
