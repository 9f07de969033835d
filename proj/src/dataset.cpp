#include "fednb/dataset.hpp"

#include <algorithm>
#include <cassert>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "fednb/rng.hpp"

namespace fednb {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t row, std::size_t column) {
    const std::string text = trim(raw);
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || text.empty())
        throw ParseError("non-numeric cell '" + text + "'", row, column);
    if (!std::isfinite(value)) throw ParseError("non-finite cell '" + text + "'", row, column);
    return value;
}

}  // namespace

std::size_t Table::attribute_index(const std::string& attribute) const {
    auto it = std::find(attribute_names.begin(), attribute_names.end(), attribute);
    if (it == attribute_names.end()) throw SchemaError("unknown attribute '" + attribute + "'");
    return static_cast<std::size_t>(it - attribute_names.begin());
}

std::vector<double> Table::column(std::size_t attribute_idx) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(row.values.at(attribute_idx));
    return out;
}

std::vector<std::string> Table::labels() const {
    std::vector<std::string> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(row.class_label);
    return out;
}

std::vector<std::string> Table::distinct_labels() const {
    std::set<std::string> seen;
    for (const auto& row : rows) seen.insert(row.class_label);
    return {seen.begin(), seen.end()};
}

LabelSelector parse_label_selector(const std::string& text) {
    if (!text.empty() && std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        std::size_t index = 0;
        std::from_chars(text.data(), text.data() + text.size(), index);
        return index;
    }
    return text;
}

Table load_csv(const std::filesystem::path& path, const LabelSelector& label_column) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line)) throw EmptyDataset("'" + path.string() + "' has no header row");
    std::vector<std::string> header = split_line(line);
    for (auto& h : header) h = trim(h);

    std::size_t label_idx;
    if (std::holds_alternative<std::size_t>(label_column)) {
        label_idx = std::get<std::size_t>(label_column);
        if (label_idx >= header.size())
            throw SchemaError("label column index " + std::to_string(label_idx) + " out of range (" +
                              std::to_string(header.size()) + " columns)");
    } else {
        const std::string& name = std::get<std::string>(label_column);
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError("label column '" + name + "' not found");
        label_idx = static_cast<std::size_t>(it - header.begin());
    }

    Table table;
    table.name = path.stem().string();
    table.label_name = header[label_idx];
    for (std::size_t c = 0; c < header.size(); ++c)
        if (c != label_idx) table.attribute_names.push_back(header[c]);

    std::uint64_t row_id = 0;
    std::size_t file_row = 1;  // header is line 1
    while (std::getline(in, line)) {
        ++file_row;
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size())
            throw ParseError("ragged row: " + std::to_string(cells.size()) + " cells, expected " +
                                 std::to_string(header.size()),
                             file_row, 0);
        Row row;
        row.row_id = row_id++;
        row.values.reserve(header.size() - 1);
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c == label_idx) {
                row.class_label = trim(cells[c]);
            } else {
                row.values.push_back(parse_cell(cells[c], file_row, c + 1));
            }
        }
        table.rows.push_back(std::move(row));
    }

    if (table.rows.empty()) throw EmptyDataset("'" + path.string() + "' has no data rows");
    if (table.distinct_labels().size() < 2)
        throw EmptyDataset("'" + path.string() + "' has fewer than 2 distinct class labels");
    return table;
}

std::vector<PartitionedTable> partition_vertical(const Table& table, std::size_t num_sites) {
    const std::size_t n_attrs = table.attribute_names.size();
    if (num_sites == 0) throw TooManySites("num_sites must be at least 1");
    if (num_sites > n_attrs)
        throw TooManySites("cannot split " + std::to_string(n_attrs) + " attributes across " +
                           std::to_string(num_sites) + " sites");

    const std::size_t base = n_attrs / num_sites;
    const std::size_t extra = n_attrs % num_sites;

    std::vector<PartitionedTable> fragments;
    fragments.reserve(num_sites);
    std::size_t begin = 0;
    for (std::size_t site = 0; site < num_sites; ++site) {
        const std::size_t width = base + (site < extra ? 1 : 0);
        PartitionedTable fragment;
        fragment.site_id = static_cast<std::uint32_t>(site);
        fragment.attribute_names.assign(table.attribute_names.begin() + begin,
                                        table.attribute_names.begin() + begin + width);
        fragment.rows.reserve(table.rows.size());
        for (const auto& row : table.rows) {
            Row r;
            r.row_id = row.row_id;
            r.class_label = row.class_label;
            r.values.assign(row.values.begin() + begin, row.values.begin() + begin + width);
            fragment.rows.push_back(std::move(r));
        }
        fragments.push_back(std::move(fragment));
        begin += width;
    }
    return fragments;
}

Table reassemble(std::span<const PartitionedTable> fragments) {
    if (fragments.empty()) throw ConsistencyError("nothing to reassemble");

    std::vector<const PartitionedTable*> ordered;
    ordered.reserve(fragments.size());
    for (const auto& f : fragments) ordered.push_back(&f);
    std::sort(ordered.begin(), ordered.end(),
              [](const PartitionedTable* a, const PartitionedTable* b) { return a->site_id < b->site_id; });

    const PartitionedTable& first = *ordered.front();
    Table table;
    table.name = "reassembled";
    for (const auto* fragment : ordered) {
        if (fragment->rows.size() != first.rows.size())
            throw ConsistencyError("fragments disagree on row count");
        table.attribute_names.insert(table.attribute_names.end(), fragment->attribute_names.begin(),
                                     fragment->attribute_names.end());
    }
    {
        std::set<std::string> seen(table.attribute_names.begin(), table.attribute_names.end());
        if (seen.size() != table.attribute_names.size())
            throw ConsistencyError("fragments share attribute names");
    }

    table.rows.reserve(first.rows.size());
    for (std::size_t i = 0; i < first.rows.size(); ++i) {
        Row row;
        row.row_id = first.rows[i].row_id;
        row.class_label = first.rows[i].class_label;
        for (const auto* fragment : ordered) {
            if (fragment->rows[i].row_id != row.row_id)
                throw ConsistencyError("fragments disagree on row_id at position " + std::to_string(i));
            if (fragment->rows[i].class_label != row.class_label)
                throw ConsistencyError("fragments disagree on class label for row_id " +
                                       std::to_string(row.row_id));
            row.values.insert(row.values.end(), fragment->rows[i].values.begin(),
                              fragment->rows[i].values.end());
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::vector<Split> generate_splits(std::size_t n_rows, const SplitPlan& plan) {
    if (n_rows < 2) throw DegenerateSplit("need at least 2 rows to split");

    std::vector<Split> splits;
    splits.reserve(plan.split_count());

    for (std::uint32_t repeat = 0; repeat < plan.repeats; ++repeat) {
        // Fisher-Yates over row positions, one independent stream per repeat.
        std::vector<std::uint64_t> perm(n_rows);
        std::iota(perm.begin(), perm.end(), 0);
        Xoshiro256pp rng(derive_stream_seed(plan.seed, repeat));
        for (std::size_t i = n_rows - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.bounded(i + 1));
            std::swap(perm[i], perm[j]);
        }

        if (plan.scheme == SplitPlan::Scheme::Holdout) {
            const auto cut = static_cast<std::size_t>(
                std::llround(plan.train_fraction * static_cast<double>(n_rows)));
            if (cut == 0 || cut >= n_rows)
                throw DegenerateSplit("train fraction " + std::to_string(plan.train_fraction) +
                                      " leaves an empty side for " + std::to_string(n_rows) + " rows");
            Split split;
            split.train_ids.assign(perm.begin(), perm.begin() + cut);
            split.test_ids.assign(perm.begin() + cut, perm.end());
            splits.push_back(std::move(split));
        } else {
            if (plan.folds < 2 || plan.folds > n_rows)
                throw DegenerateSplit("cannot make " + std::to_string(plan.folds) + " folds from " +
                                      std::to_string(n_rows) + " rows");
            // Contiguous blocks of the permutation; sizes differ by at most 1.
            const std::size_t base = n_rows / plan.folds;
            const std::size_t extra = n_rows % plan.folds;
            std::size_t begin = 0;
            for (std::uint32_t fold = 0; fold < plan.folds; ++fold) {
                const std::size_t width = base + (fold < extra ? 1 : 0);
                Split split;
                split.test_ids.assign(perm.begin() + begin, perm.begin() + begin + width);
                split.train_ids.reserve(n_rows - width);
                split.train_ids.insert(split.train_ids.end(), perm.begin(), perm.begin() + begin);
                split.train_ids.insert(split.train_ids.end(), perm.begin() + begin + width, perm.end());
                splits.push_back(std::move(split));
                begin += width;
            }
        }
    }
    return splits;
}

void write_fragment_csv(const PartitionedTable& fragment, const std::string& label_name,
                        const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write '" + path.string() + "'");
    out << "row_id";
    for (const auto& name : fragment.attribute_names) out << ',' << name;
    out << ',' << label_name << '\n';
    out.precision(17);
    for (const auto& row : fragment.rows) {
        out << row.row_id;
        for (double v : row.values) out << ',' << v;
        out << ',' << row.class_label << '\n';
    }
}

PartitionedTable load_fragment_csv(const std::filesystem::path& path, std::uint32_t site_id) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw EmptyDataset("'" + path.string() + "' has no header row");
    std::vector<std::string> header = split_line(line);
    for (auto& h : header) h = trim(h);
    if (header.size() < 3 || header.front() != "row_id")
        throw SchemaError("'" + path.string() + "' is not a fragment file (row_id, attrs..., label)");

    PartitionedTable fragment;
    fragment.site_id = site_id;
    fragment.attribute_names.assign(header.begin() + 1, header.end() - 1);

    std::size_t file_row = 1;
    while (std::getline(in, line)) {
        ++file_row;
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size()) throw ParseError("ragged row", file_row, 0);
        Row row;
        const std::string id_text = trim(cells.front());
        auto [ptr, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), row.row_id);
        if (ec != std::errc{} || ptr != id_text.data() + id_text.size())
            throw ParseError("bad row_id '" + id_text + "'", file_row, 1);
        for (std::size_t c = 1; c + 1 < cells.size(); ++c)
            row.values.push_back(parse_cell(cells[c], file_row, c + 1));
        row.class_label = trim(cells.back());
        fragment.rows.push_back(std::move(row));
    }
    if (fragment.rows.empty()) throw EmptyDataset("'" + path.string() + "' has no data rows");
    return fragment;
}

}  // namespace fednb
