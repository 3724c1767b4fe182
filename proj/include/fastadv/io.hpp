/**
 * \file io.hpp
 *
 * File formats: canonical model JSON, XGBoost JSON dumps (import only),
 * CSV datasets, feature subset JSON, attack records as JSONL and run
 * summaries as CSV. Every writer is deterministic and prints doubles in
 * their shortest round-trip form.
 */

#ifndef FASTADV_IO_HPP
#define FASTADV_IO_HPP

#include "attack.hpp"
#include "model.hpp"
#include "pipeline.hpp"
#include "select.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace fastadv::io {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{})
        throw FormatError("cannot format number");
    return {buf, end};
}

inline std::optional<double> parse_double(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    if (!s.empty() && s.front() == '+')
        s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
        return std::nullopt;
    return v;
}

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw FormatError("cannot write " + path);
    out << content;
    if (!out)
        throw FormatError("error while writing " + path);
}

namespace detail {

/// Quotes bare NaN / Infinity tokens (as written by some JSON emitters) so
/// the document parses and validation can report where they occur.
inline std::string quote_nonfinite_tokens(const std::string& text)
{
    std::string out;
    out.reserve(text.size());
    bool in_string = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            out += c;
            if (c == '\\' && i + 1 < text.size())
                out += text[++i];
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"') {
            in_string = true;
            out += c;
            continue;
        }
        bool replaced = false;
        for (std::string_view tok : {"-Infinity", "Infinity", "NaN"}) {
            if (text.compare(i, tok.size(), tok) == 0) {
                out += '"';
                out += tok;
                out += '"';
                i += tok.size() - 1;
                replaced = true;
                break;
            }
        }
        if (!replaced)
            out += c;
    }
    return out;
}

inline json parse_json(const std::string& text, const std::string& what)
{
    try {
        return json::parse(quote_nonfinite_tokens(text));
    } catch (const json::parse_error& e) {
        throw FormatError(what + ": " + e.what());
    }
}

inline const json& field(const json& obj, const char* key, const std::string& where)
{
    if (!obj.is_object())
        throw FormatError(where + ": expected an object");
    auto it = obj.find(key);
    if (it == obj.end())
        throw FormatError(where + ": missing field '" + key + "'");
    return *it;
}

inline double finite_number(const json& v, const std::string& where)
{
    double d = 0.0;
    if (v.is_number())
        d = v.get<double>();
    else if (v.is_string())
        d = std::nan(""); // NaN / Infinity tokens
    else
        throw FormatError(where + ": expected a number");
    if (!std::isfinite(d))
        throw FormatError(where + ": value is not finite");
    return d;
}

inline std::int64_t integer(const json& v, const std::string& where)
{
    if (!v.is_number_integer())
        throw FormatError(where + ": expected an integer");
    return v.get<std::int64_t>();
}

/// Node array with the root at index 0; renumbered in pre-order only when
/// the root sits elsewhere.
inline std::vector<Node> rooted_nodes(const Tree& t)
{
    if (t.root() == 0)
        return t.nodes();
    std::vector<Node> out;
    std::vector<std::pair<NodeId, NodeId>> stack{{t.root(), -1}};
    while (!stack.empty()) {
        auto [src, parent] = stack.back();
        stack.pop_back();
        const auto dst = static_cast<NodeId>(out.size());
        if (parent >= 0) {
            Node& p = out[static_cast<std::size_t>(parent)];
            if (p.left == -2)
                p.left = dst;
            else
                p.right = dst;
        }
        Node n = t.node(src);
        if (!n.is_leaf()) {
            stack.emplace_back(n.right, dst);
            stack.emplace_back(n.left, dst);
            n.left = -2;
            n.right = -2;
        }
        out.push_back(n);
    }
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Canonical model files

inline json ensemble_to_json(const Ensemble& e)
{
    json trees = json::array();
    for (const Tree& t : e.trees()) {
        json nodes = json::array();
        for (const Node& n : detail::rooted_nodes(t)) {
            if (n.is_leaf())
                nodes.push_back({{"value", n.value}});
            else
                nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
        }
        trees.push_back(std::move(nodes));
    }
    return {{"format_version", kFormatVersion}, {"num_features", e.num_features()}, {"bias", e.bias()}, {"trees", trees}};
}

inline Ensemble ensemble_from_json(const json& j)
{
    const std::string root = "model";
    if (detail::integer(detail::field(j, "format_version", root), root + ".format_version") != kFormatVersion)
        throw FormatError(root + ": unsupported format_version");
    const std::int64_t d = detail::integer(detail::field(j, "num_features", root), root + ".num_features");
    if (d <= 0)
        throw FormatError(root + ".num_features: must be positive");
    const double bias = detail::finite_number(detail::field(j, "bias", root), root + ".bias");
    const json& trees = detail::field(j, "trees", root);
    if (!trees.is_array())
        throw FormatError(root + ".trees: expected an array");

    std::vector<Tree> out;
    for (std::size_t t = 0; t < trees.size(); ++t) {
        const std::string tw = "trees[" + std::to_string(t) + "]";
        if (!trees[t].is_array() || trees[t].empty())
            throw FormatError(tw + ": expected a non-empty node array");
        std::vector<Node> nodes;
        for (std::size_t i = 0; i < trees[t].size(); ++i) {
            const json& n = trees[t][i];
            const std::string nw = tw + ".nodes[" + std::to_string(i) + "]";
            if (n.is_object() && n.contains("value")) {
                nodes.push_back(Node::leaf(detail::finite_number(n["value"], nw + ".value")));
                continue;
            }
            const std::int64_t f = detail::integer(detail::field(n, "feature", nw), nw + ".feature");
            if (f < 0 || f >= d)
                throw FormatError(nw + ".feature: out of range");
            const double thr = detail::finite_number(detail::field(n, "threshold", nw), nw + ".threshold");
            const std::int64_t l = detail::integer(detail::field(n, "left", nw), nw + ".left");
            const std::int64_t r = detail::integer(detail::field(n, "right", nw), nw + ".right");
            nodes.push_back(Node::split(static_cast<FeatureId>(f), thr, static_cast<NodeId>(l), static_cast<NodeId>(r)));
        }
        try {
            Tree tree(std::move(nodes), 0);
            tree.validate(static_cast<std::size_t>(d));
            out.push_back(std::move(tree));
        } catch (const ModelError& e) {
            throw FormatError(tw + ": " + e.what());
        }
    }
    return Ensemble(std::move(out), static_cast<std::size_t>(d), bias);
}

inline std::string dump_ensemble(const Ensemble& e) { return ensemble_to_json(e).dump() + "\n"; }

inline Ensemble parse_ensemble(const std::string& text)
{
    return ensemble_from_json(detail::parse_json(text, "model"));
}

inline void save_ensemble(const Ensemble& e, const std::string& path) { write_file(path, dump_ensemble(e)); }

inline Ensemble load_ensemble(const std::string& path)
{
    try {
        return parse_ensemble(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// XGBoost JSON dumps

struct XgboostImportOptions {
    /// Number of features; 0 infers it from the largest split index.
    std::size_t num_features = 0;
    /// Base score as a probability; the bias becomes its logit.
    double base_score = 0.5;
    /// Leaves hold class-1 probabilities of a random forest; map them so the
    /// 0.5 vote boundary becomes margin 0.
    bool random_forest = false;
};

struct XgboostImportResult {
    Ensemble model;
    std::vector<std::string> warnings;
};

namespace detail {

inline FeatureId parse_split_feature(const json& split, const std::string& where)
{
    if (split.is_number_integer())
        return static_cast<FeatureId>(split.get<std::int64_t>());
    if (!split.is_string())
        throw FormatError(where + ".split: expected a feature name");
    std::string s = split.get<std::string>();
    std::string_view v = s;
    if (!v.empty() && v.front() == 'f')
        v.remove_prefix(1);
    std::size_t f = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), f);
    if (ec != std::errc{} || p != v.data() + v.size() || v.empty())
        throw FormatError(where + ".split: unsupported feature name '" + s + "' (expected f<index>)");
    return f;
}

struct XgbBuilder {
    std::vector<Node> nodes;
    std::size_t max_feature = 0;
    bool saw_missing = false;

    NodeId add(const json& n, const std::string& where)
    {
        if (!n.is_object())
            throw FormatError(where + ": expected an object");
        if (n.contains("leaf")) {
            const auto id = static_cast<NodeId>(nodes.size());
            nodes.push_back(Node::leaf(finite_number(n["leaf"], where + ".leaf")));
            return id;
        }
        if (n.contains("categories") || n.contains("cats") || !n.contains("split_condition"))
            throw FormatError(where + ": categorical splits are not supported");
        const FeatureId f = parse_split_feature(field(n, "split", where), where);
        const double thr = finite_number(n["split_condition"], where + ".split_condition");
        const std::int64_t yes = integer(field(n, "yes", where), where + ".yes");
        const std::int64_t no = integer(field(n, "no", where), where + ".no");
        if (n.contains("missing"))
            saw_missing = true;
        const json& children = field(n, "children", where);
        if (!children.is_array() || children.size() != 2)
            throw FormatError(where + ".children: expected two children");
        auto find_child = [&](std::int64_t id) -> std::size_t {
            for (std::size_t c = 0; c < children.size(); ++c)
                if (children[c].is_object() && children[c].contains("nodeid") && children[c]["nodeid"] == id)
                    return c;
            throw FormatError(where + ": child node " + std::to_string(id) + " not found");
        };
        const std::size_t yi = find_child(yes);
        const std::size_t ni = find_child(no);
        max_feature = std::max(max_feature, f);
        const auto id = static_cast<NodeId>(nodes.size());
        nodes.push_back(Node::split(f, thr, -1, -1));
        const NodeId l = add(children[yi], where + ".children[" + std::to_string(yi) + "]");
        const NodeId r = add(children[ni], where + ".children[" + std::to_string(ni) + "]");
        nodes[static_cast<std::size_t>(id)].left = l;
        nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    }
};

} // namespace detail

/**
 * Converts a per-tree JSON dump (the array written by XGBoost's
 * `dump_model(..., dump_format="json")`). The yes-branch of `f < t` becomes
 * the left child. Missing-value directions cannot be represented and are
 * dropped with a warning.
 */
inline XgboostImportResult import_xgboost_dump_text(const std::string& text, const XgboostImportOptions& opt)
{
    const json dump = detail::parse_json(text, "xgboost dump");
    if (!dump.is_array())
        throw FormatError("xgboost dump: expected an array of trees");
    if (!(opt.base_score > 0.0 && opt.base_score < 1.0))
        throw FormatError("xgboost import: base_score must lie in (0, 1)");

    XgboostImportResult res;
    std::vector<Tree> trees;
    std::size_t max_feature = 0;
    bool any_split = false;
    bool saw_missing = false;
    for (std::size_t t = 0; t < dump.size(); ++t) {
        detail::XgbBuilder b;
        b.add(dump[t], "tree[" + std::to_string(t) + "]");
        for (const Node& n : b.nodes)
            any_split = any_split || !n.is_leaf();
        max_feature = std::max(max_feature, b.max_feature);
        saw_missing = saw_missing || b.saw_missing;
        trees.emplace_back(std::move(b.nodes), 0);
    }
    const std::size_t inferred = any_split ? max_feature + 1 : 1;
    std::size_t d = opt.num_features == 0 ? inferred : opt.num_features;
    if (d < inferred)
        throw FormatError("xgboost dump uses feature " + std::to_string(max_feature) + " but num_features is " +
                          std::to_string(d));

    double bias = std::log(opt.base_score / (1.0 - opt.base_score));
    if (opt.random_forest) {
        const double scale = trees.empty() ? 1.0 : 1.0 / static_cast<double>(trees.size());
        std::vector<Tree> scaled;
        for (const Tree& t : trees) {
            std::vector<Node> nodes = t.nodes();
            for (Node& n : nodes)
                if (n.is_leaf())
                    n.value = (n.value - 0.5) * scale;
            scaled.emplace_back(std::move(nodes), t.root());
        }
        trees = std::move(scaled);
        bias = 0.0;
    }
    if (saw_missing)
        res.warnings.emplace_back("missing-value directions in the dump were ignored");
    try {
        res.model = Ensemble(std::move(trees), d, bias);
    } catch (const ModelError& e) {
        throw FormatError(std::string("xgboost dump: ") + e.what());
    }
    return res;
}

inline XgboostImportResult import_xgboost_dump(const std::string& path, const XgboostImportOptions& opt)
{
    try {
        return import_xgboost_dump_text(read_file(path), opt);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// CSV datasets

struct Dataset {
    std::vector<std::string> feature_names;
    std::vector<Example> examples;
    /// Labels were given as 0/1 and mapped to -1/+1.
    bool mapped_zero_one = false;
};

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line)
{
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(line.substr(start));
            return cells;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
        s.remove_suffix(1);
    return s;
}

} // namespace detail

/**
 * Parses a rectangular CSV with a header row. `label_column` names the label
 * column (empty for unlabelled data); labels may be -1/+1 or 0/1, the latter
 * mapped to -1/+1. All other columns are features, in file order.
 */
inline Dataset parse_dataset(const std::string& text, const std::string& label_column)
{
    Dataset ds;
    std::istringstream in(text);
    std::string line;
    std::size_t row = 0;
    if (!std::getline(in, line))
        throw FormatError("dataset: missing header row");
    std::vector<std::string> header;
    for (std::string_view h : detail::split_csv_line(line))
        header.emplace_back(detail::trim(h));
    std::optional<std::size_t> label_idx;
    for (std::size_t c = 0; c < header.size(); ++c) {
        std::string name = header[c];
        if (!label_column.empty() && name == label_column)
            label_idx = c;
        else
            ds.feature_names.push_back(std::move(name));
    }
    if (!label_column.empty() && !label_idx)
        throw FormatError("dataset: no label column named '" + label_column + "'");
    if (ds.feature_names.empty())
        throw FormatError("dataset: no feature columns");

    std::vector<double> raw_labels;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty())
            continue;
        std::vector<std::string_view> cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw FormatError("dataset row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                              " cells, found " + std::to_string(cells.size()));
        Example x;
        x.values.reserve(ds.feature_names.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            auto v = parse_double(detail::trim(cells[c]));
            if (!v || !std::isfinite(*v))
                throw FormatError("dataset row " + std::to_string(row) + ", column '" + header[c] +
                                  "': not a finite number: '" +
                                  std::string(cells[c]) + "'");
            if (label_idx && c == *label_idx)
                raw_labels.push_back(*v);
            else
                x.values.push_back(*v);
        }
        ds.examples.push_back(std::move(x));
    }
    if (label_idx) {
        bool has_zero = false;
        for (std::size_t i = 0; i < raw_labels.size(); ++i) {
            const double l = raw_labels[i];
            if (l != -1.0 && l != 0.0 && l != 1.0)
                throw FormatError("dataset row " + std::to_string(i + 1) + ": label " + format_double(l) +
                                  " is not one of -1, 0, 1");
            has_zero = has_zero || l == 0.0;
        }
        const bool has_neg = std::any_of(raw_labels.begin(), raw_labels.end(), [](double l) { return l == -1.0; });
        if (has_zero && has_neg)
            throw FormatError("dataset: labels mix 0 and -1");
        ds.mapped_zero_one = has_zero;
        for (std::size_t i = 0; i < raw_labels.size(); ++i)
            ds.examples[i].label = raw_labels[i] > 0.0 ? 1 : -1;
    }
    return ds;
}

inline Dataset load_dataset(const std::string& path, const std::string& label_column)
{
    try {
        return parse_dataset(read_file(path), label_column);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

/// Writes examples as CSV with columns f0..f{d-1} and, when any example is
/// labelled, a trailing `label` column with -1/+1.
inline std::string dump_dataset(std::span<const Example> data, std::size_t d)
{
    const bool labelled = std::any_of(data.begin(), data.end(), [](const Example& x) { return x.label.has_value(); });
    std::string out;
    for (std::size_t f = 0; f < d; ++f)
        out += (f ? ",f" : "f") + std::to_string(f);
    if (labelled)
        out += ",label";
    out += '\n';
    for (const Example& x : data) {
        for (std::size_t f = 0; f < d; ++f) {
            if (f)
                out += ',';
            out += format_double(x.values[f]);
        }
        if (labelled)
            out += x.label ? (*x.label > 0 ? ",1" : ",-1") : ",";
        out += '\n';
    }
    return out;
}

inline void save_dataset(std::span<const Example> data, std::size_t d, const std::string& path)
{
    write_file(path, dump_dataset(data, d));
}

// ---------------------------------------------------------------------------
// Feature subsets

inline json subset_to_json(const SelectionReport& rep)
{
    json counts = json::object();
    for (std::size_t f = 0; f < rep.counts.size(); ++f)
        if (rep.counts.counts[f] > 0)
            counts[std::to_string(f)] = rep.counts.counts[f];
    return {{"format_version", kFormatVersion},
            {"features", rep.subset.features},
            {"fraction", rep.subset.fraction},
            {"counts", counts},
            {"count_total", rep.counts.total},
            {"rounds_used", rep.rounds_used},
            {"v_bar_history", rep.v_bar_history},
            {"delta_margin", rep.delta_margin},
            {"accepted", rep.accepted}};
}

inline std::string dump_subset(const SelectionReport& rep) { return subset_to_json(rep).dump(2) + "\n"; }

/// Reads a subset file; only `features` and `fraction` are required.
inline SelectionReport parse_subset(const std::string& text, std::size_t num_features)
{
    const json j = detail::parse_json(text, "subset");
    const std::string w = "subset";
    const json& feats = detail::field(j, "features", w);
    if (!feats.is_array())
        throw FormatError(w + ".features: expected an array");
    SelectionReport rep;
    rep.counts = PerturbationCounts(num_features);
    for (std::size_t i = 0; i < feats.size(); ++i) {
        const std::int64_t f = detail::integer(feats[i], w + ".features[" + std::to_string(i) + "]");
        if (f < 0 || static_cast<std::size_t>(f) >= num_features)
            throw FormatError(w + ".features[" + std::to_string(i) + "]: feature " + std::to_string(f) +
                              " out of range for " + std::to_string(num_features) + " features");
        rep.subset.features.push_back(static_cast<FeatureId>(f));
    }
    rep.subset.fraction = j.contains("fraction") ? detail::finite_number(j["fraction"], w + ".fraction") : 0.0;
    if (j.contains("counts")) {
        for (const auto& [k, v] : j["counts"].items()) {
            auto f = parse_double(k);
            if (!f || *f < 0 || static_cast<std::size_t>(*f) >= num_features)
                throw FormatError(w + ".counts: bad feature key '" + k + "'");
            rep.counts.counts[static_cast<std::size_t>(*f)] = v.get<std::uint64_t>();
        }
    }
    if (j.contains("count_total"))
        rep.counts.total = j["count_total"].get<std::uint64_t>();
    if (j.contains("rounds_used"))
        rep.rounds_used = j["rounds_used"].get<std::size_t>();
    if (j.contains("v_bar_history"))
        rep.v_bar_history = j["v_bar_history"].get<std::vector<double>>();
    if (j.contains("delta_margin"))
        rep.delta_margin = j["delta_margin"].get<double>();
    if (j.contains("accepted"))
        rep.accepted = j["accepted"].get<bool>();
    return rep;
}

inline SelectionReport load_subset(const std::string& path, std::size_t num_features)
{
    try {
        return parse_subset(read_file(path), num_features);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    } catch (const json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Attack records (JSONL)

namespace detail {

inline Status parse_status(const std::string& s)
{
    if (s == "SAT")
        return Status::sat;
    if (s == "UNSAT")
        return Status::unsat;
    if (s == "TIMEOUT")
        return Status::timeout;
    throw FormatError("unknown outcome status '" + s + "'");
}

inline json outcome_to_json(const AttackOutcome& o)
{
    json j = {{"status", to_string(o.status)}};
    if (o.is_sat()) {
        j["linf"] = o.linf;
        j["margin"] = o.margin;
        if (o.witness)
            j["witness"] = o.witness->values;
    }
    return j;
}

inline AttackOutcome outcome_from_json(const json& j)
{
    AttackOutcome o;
    o.status = parse_status(j.at("status").get<std::string>());
    if (o.is_sat()) {
        o.linf = j.at("linf").get<double>();
        o.margin = j.at("margin").get<double>();
        if (j.contains("witness"))
            o.witness = Example{j["witness"].get<std::vector<double>>(), std::nullopt};
    }
    return o;
}

inline json phase_to_json(const std::optional<PhaseResult>& p)
{
    if (!p)
        return nullptr;
    json j = outcome_to_json(p->outcome);
    j["wall_s"] = p->wall_s;
    j["expansions"] = p->expansions;
    return j;
}

inline std::optional<PhaseResult> phase_from_json(const json& j)
{
    if (j.is_null())
        return std::nullopt;
    PhaseResult p;
    p.outcome = outcome_from_json(j);
    p.wall_s = j.at("wall_s").get<double>();
    p.expansions = j.at("expansions").get<std::uint64_t>();
    return p;
}

} // namespace detail

inline json record_to_json(const AttackRecord& r)
{
    return {{"example_id", r.example_id},
            {"setting", to_string(r.setting)},
            {"status", to_string(r.status)},
            {"pruned", detail::phase_to_json(r.pruned)},
            {"full", detail::phase_to_json(r.full)},
            {"final", detail::outcome_to_json(r.final_outcome)},
            {"used_fallback", r.used_fallback}};
}

inline AttackRecord record_from_json(const json& j)
{
    AttackRecord r;
    r.example_id = j.at("example_id").get<std::size_t>();
    r.setting = parse_setting(j.at("setting").get<std::string>());
    const std::string st = j.at("status").get<std::string>();
    if (st == "attacked")
        r.status = RecordStatus::attacked;
    else if (st == "misclassified")
        r.status = RecordStatus::misclassified;
    else if (st == "skipped")
        r.status = RecordStatus::skipped;
    else
        throw FormatError("unknown record status '" + st + "'");
    r.final_outcome = detail::outcome_from_json(j.at("final"));
    r.used_fallback = j.at("used_fallback").get<bool>();
    r.pruned = detail::phase_from_json(j.at("pruned"));
    r.full = detail::phase_from_json(j.at("full"));
    return r;
}

inline std::string dump_records(std::span<const AttackRecord> records)
{
    std::string out;
    for (const AttackRecord& r : records) {
        out += record_to_json(r).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<AttackRecord> parse_records(const std::string& text)
{
    std::vector<AttackRecord> out;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty())
            continue;
        try {
            out.push_back(record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw FormatError("results line " + std::to_string(lineno) + ": " + e.what());
        } catch (const ConfigError& e) {
            throw FormatError("results line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

inline std::vector<AttackRecord> load_records(const std::string& path)
{
    try {
        return parse_records(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Summary CSV

struct SummaryRow {
    std::string dataset;
    std::string setting;
    std::string engine;
    std::optional<std::size_t> subset_size;
    RunSummary summary;

    bool operator==(const SummaryRow&) const = default;
};

inline const std::vector<std::string>& summary_columns()
{
    static const std::vector<std::string> cols = {
        "dataset", "setting", "engine", "subset_size", "records", "attacked", "misclassified", "skipped",
        "sat", "unsat", "timeout", "full_calls", "false_negatives", "total_wall_s", "mean_wall_s",
        "total_expansions", "speedup", "fnr", "fallback_fraction", "timeout_fraction", "skipped_fraction",
        "mean_linf", "mean_probability_delta"};
    return cols;
}

/// Columns whose values depend on wall-clock time.
inline bool is_timing_column(const std::string& c)
{
    return c == "total_wall_s" || c == "mean_wall_s" || c == "speedup";
}

inline std::string dump_summary(std::span<const SummaryRow> rows)
{
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    std::string out;
    const auto& cols = summary_columns();
    for (std::size_t i = 0; i < cols.size(); ++i)
        out += (i ? "," : "") + cols[i];
    out += '\n';
    for (const SummaryRow& row : rows) {
        const RunSummary& s = row.summary;
        std::vector<std::string> v = {row.dataset,
                                      row.setting,
                                      row.engine,
                                      row.subset_size ? std::to_string(*row.subset_size) : "",
                                      std::to_string(s.records),
                                      std::to_string(s.attacked),
                                      std::to_string(s.misclassified),
                                      std::to_string(s.skipped),
                                      std::to_string(s.sat),
                                      std::to_string(s.unsat),
                                      std::to_string(s.timeouts),
                                      std::to_string(s.full_calls),
                                      std::to_string(s.false_negatives),
                                      format_double(s.total_wall_s),
                                      format_double(s.mean_wall_s),
                                      std::to_string(s.total_expansions),
                                      opt(s.speedup),
                                      opt(s.fnr),
                                      format_double(s.fallback_fraction),
                                      format_double(s.timeout_fraction),
                                      format_double(s.skipped_fraction),
                                      opt(s.mean_linf),
                                      opt(s.mean_probability_delta)};
        for (std::size_t i = 0; i < v.size(); ++i)
            out += (i ? "," : "") + v[i];
        out += '\n';
    }
    return out;
}

inline std::vector<SummaryRow> parse_summary(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw FormatError("summary: missing header");
    const auto header = detail::split_csv_line(line);
    const auto& cols = summary_columns();
    if (header.size() != cols.size())
        throw FormatError("summary: unexpected header");
    std::vector<SummaryRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty())
            continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != cols.size())
            throw FormatError("summary line " + std::to_string(lineno) + ": wrong number of cells");
        auto num = [&](std::size_t i) {
            auto v = parse_double(cells[i]);
            if (!v)
                throw FormatError("summary line " + std::to_string(lineno) + ": bad number in column " + cols[i]);
            return *v;
        };
        auto count = [&](std::size_t i) { return static_cast<std::size_t>(num(i)); };
        auto opt = [&](std::size_t i) -> std::optional<double> {
            if (cells[i].empty())
                return std::nullopt;
            return num(i);
        };
        SummaryRow r;
        r.dataset = cells[0];
        r.setting = cells[1];
        r.engine = cells[2];
        if (!cells[3].empty())
            r.subset_size = count(3);
        RunSummary& s = r.summary;
        s.records = count(4);
        s.attacked = count(5);
        s.misclassified = count(6);
        s.skipped = count(7);
        s.sat = count(8);
        s.unsat = count(9);
        s.timeouts = count(10);
        s.full_calls = count(11);
        s.false_negatives = count(12);
        s.total_wall_s = num(13);
        s.mean_wall_s = num(14);
        s.total_expansions = static_cast<std::uint64_t>(num(15));
        s.speedup = opt(16);
        s.fnr = opt(17);
        s.fallback_fraction = num(18);
        s.timeout_fraction = num(19);
        s.skipped_fraction = num(20);
        s.mean_linf = opt(21);
        s.mean_probability_delta = opt(22);
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Robustness and histogram tables

inline std::string dump_robustness(std::span<const RobustnessRecord> records)
{
    std::string out = "example_id,setting,status,delta_star,bracket_lo,bracket_hi,used_fallback,expansions,wall_s\n";
    for (const RobustnessRecord& r : records) {
        out += std::to_string(r.example_id) + ',' + to_string(r.setting) + ',' + to_string(r.result.status) + ',' +
               format_double(r.result.delta_star) + ',' + format_double(r.result.bracket_lo) + ',' +
               format_double(r.result.bracket_hi) + ',' + (r.used_fallback ? "1" : "0") + ',' +
               std::to_string(r.result.expansions) + ',' + format_double(r.result.wall_time) + '\n';
    }
    return out;
}

inline std::string dump_histogram(const Histogram& h, std::uint64_t total_adv)
{
    std::string out = "bucket,features,adversarial_examples\n";
    out += "never," + std::to_string(h.never) + ',' + std::to_string(total_adv) + '\n';
    out += "at_most_5pct," + std::to_string(h.rare) + ',' + std::to_string(total_adv) + '\n';
    out += "over_5pct," + std::to_string(h.frequent) + ',' + std::to_string(total_adv) + '\n';
    return out;
}

} // namespace fastadv::io

#endif // FASTADV_IO_HPP
