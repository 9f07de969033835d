#include "fednb/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <nlohmann/json.hpp>

namespace fednb {

using nlohmann::json;

std::vector<ClassConditionalStats> compute_stats(const PerturbedColumn& column,
                                                 std::span<const std::string> labels) {
    if (column.values.size() != labels.size())
        throw Error("column and labels differ in length");
    if (labels.empty()) throw InsufficientClassData("no training rows");

    std::map<std::string, std::vector<double>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[labels[i]].push_back(column.values[i]);

    std::vector<ClassConditionalStats> out;
    out.reserve(by_class.size());
    for (const auto& [label, values] : by_class) {
        if (values.size() < 2)
            throw InsufficientClassData("class '" + label + "' has " +
                                        std::to_string(values.size()) +
                                        " training row(s); variance needs 2");
        ClassConditionalStats stats;
        stats.attribute_name = column.attribute_name;
        stats.class_label = label;
        stats.n = values.size();
        stats.mean = sample_mean(values);
        stats.sample_variance = sample_variance(values);
        stats.noise_variance = column.noise_variance;
        out.push_back(std::move(stats));
    }
    return out;
}

GaussianParams correct_variance(const ClassConditionalStats& stats, double floor) {
    if (!(floor > 0.0)) throw Error("variance floor must be positive");
    GaussianParams params;
    params.mu_hat = stats.mean;
    params.var_hat = std::max(stats.sample_variance - stats.noise_variance, floor);
    return params;
}

GaussianNBModel assemble_model(std::span<const ClassConditionalStats> stats,
                               const std::map<std::string, std::uint64_t>& class_counts,
                               double floor_base) {
    if (class_counts.empty()) throw Error("no class counts");
    if (!(floor_base > 0.0)) throw Error("variance floor must be positive");

    GaussianNBModel model;
    model.variance_floor = floor_base;
    for (const auto& [label, count] : class_counts) model.class_labels.push_back(label);

    std::uint64_t total = 0;
    for (const auto& [label, count] : class_counts) total += count;
    if (total == 0) throw Error("class counts sum to zero");
    for (const auto& [label, count] : class_counts)
        model.priors[label] = static_cast<double>(count) / static_cast<double>(total);

    for (const auto& cell : stats) {
        auto counted = class_counts.find(cell.class_label);
        if (counted == class_counts.end())
            throw InconsistentCounts("attribute '" + cell.attribute_name + "' reports unknown class '" +
                                     cell.class_label + "'");
        if (cell.n != counted->second)
            throw InconsistentCounts("attribute '" + cell.attribute_name + "' has n=" +
                                     std::to_string(cell.n) + " for class '" + cell.class_label +
                                     "' but class count is " + std::to_string(counted->second));

        auto attr = std::find_if(model.attributes.begin(), model.attributes.end(),
                                 [&](const auto& a) { return a.name == cell.attribute_name; });
        if (attr == model.attributes.end()) {
            model.attributes.push_back({cell.attribute_name, {}});
            attr = model.attributes.end() - 1;
        }
        if (attr->per_class.count(cell.class_label))
            throw MissingCell("duplicate cell (" + cell.attribute_name + ", " + cell.class_label + ")");
        const double floor = floor_base * (1.0 + cell.mean * cell.mean);
        attr->per_class[cell.class_label] = correct_variance(cell, floor);
    }

    for (const auto& attribute : model.attributes)
        for (const auto& label : model.class_labels)
            if (!attribute.per_class.count(label))
                throw MissingCell("no statistics for (" + attribute.name + ", " + label + ")");

    return model;
}

Classification classify(const GaussianNBModel& model, const std::map<std::string, double>& instance) {
    Classification result;
    for (const auto& label : model.class_labels) {
        double score = std::log(model.priors.at(label));
        for (const auto& attribute : model.attributes) {
            auto value = instance.find(attribute.name);
            if (value == instance.end())
                throw MissingAttribute("instance lacks attribute '" + attribute.name + "'");
            const GaussianParams& p = attribute.per_class.at(label);
            const double d = value->second - p.mu_hat;
            score += -0.5 * std::log(2.0 * std::numbers::pi * p.var_hat) - d * d / (2.0 * p.var_hat);
        }
        result.log_scores[label] = score;
    }
    // class_labels is sorted, so strict > keeps the lexicographically smaller
    // label on ties.
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& label : model.class_labels) {
        if (result.log_scores[label] > best) {
            best = result.log_scores[label];
            result.label = label;
        }
    }
    return result;
}

GaussianNBModel baseline_fit(const Table& table, std::span<const std::uint64_t> train_ids,
                             double floor_base) {
    std::vector<std::string> labels;
    labels.reserve(train_ids.size());
    std::map<std::string, std::uint64_t> class_counts;
    for (std::uint64_t id : train_ids) {
        const auto& label = table.rows.at(id).class_label;
        labels.push_back(label);
        ++class_counts[label];
    }

    std::vector<ClassConditionalStats> stats;
    for (std::size_t a = 0; a < table.attribute_names.size(); ++a) {
        PerturbedColumn column;
        column.attribute_name = table.attribute_names[a];
        column.noise_variance = 0.0;
        column.values.reserve(train_ids.size());
        for (std::uint64_t id : train_ids) column.values.push_back(table.rows.at(id).values.at(a));
        auto column_stats = compute_stats(column, labels);
        stats.insert(stats.end(), column_stats.begin(), column_stats.end());
    }
    return assemble_model(stats, class_counts, floor_base);
}

json GaussianNBModel::to_json() const {
    json attrs = json::array();
    for (const auto& attribute : attributes) {
        json per_class = json::object();
        for (const auto& [label, params] : attribute.per_class)
            per_class[label] = {{"mu", params.mu_hat}, {"var", params.var_hat}};
        attrs.push_back({{"name", attribute.name}, {"per_class", per_class}});
    }
    return json{{"attributes", attrs},
                {"class_labels", class_labels},
                {"priors", priors},
                {"variance_floor", variance_floor}};
}

std::string GaussianNBModel::to_canonical_json() const { return to_json().dump(); }

GaussianNBModel GaussianNBModel::from_json(const json& j) {
    GaussianNBModel model;
    model.class_labels = j.at("class_labels").get<std::vector<std::string>>();
    model.priors = j.at("priors").get<std::map<std::string, double>>();
    model.variance_floor = j.at("variance_floor").get<double>();
    for (const auto& attr : j.at("attributes")) {
        GaussianNBModel::Attribute attribute;
        attribute.name = attr.at("name").get<std::string>();
        for (const auto& [label, params] : attr.at("per_class").items())
            attribute.per_class[label] = {params.at("mu").get<double>(), params.at("var").get<double>()};
        model.attributes.push_back(std::move(attribute));
    }
    return model;
}

}  // namespace fednb
