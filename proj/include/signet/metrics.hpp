#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "signet/common.hpp"
#include "signet/params.hpp"

namespace signet {

// ---------------------------------------------------------------------------
// Confusion matrix: rows = actual, columns = predicted.
// ---------------------------------------------------------------------------

struct ConfusionMatrix {
    std::size_t k = 2;
    std::vector<std::size_t> counts;  // k*k, row-major

    std::size_t& at(std::size_t actual, std::size_t predicted) { return counts[actual * k + predicted]; }
    std::size_t at(std::size_t actual, std::size_t predicted) const { return counts[actual * k + predicted]; }
    std::size_t total() const {
        std::size_t t = 0;
        for (std::size_t c : counts) t += c;
        return t;
    }
};

inline ConfusionMatrix confusion(const std::vector<std::size_t>& predictions,
                                 const std::vector<std::size_t>& labels, std::size_t k) {
    require(predictions.size() == labels.size(),
            "confusion: " + std::to_string(predictions.size()) + " predictions vs " +
                std::to_string(labels.size()) + " labels");
    ConfusionMatrix cm;
    cm.k = k;
    cm.counts.assign(k * k, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        require(labels[i] < k, "confusion: label " + std::to_string(labels[i]) + " out of range");
        require(predictions[i] < k, "confusion: prediction " + std::to_string(predictions[i]) + " out of range");
        cm.at(labels[i], predictions[i]) += 1;
    }
    return cm;
}

// ---------------------------------------------------------------------------
// Binary detection metrics. Positive class is fake (label 1). Metrics with a
// zero denominator are reported as undefined (nullopt), not as zero.
// ---------------------------------------------------------------------------

struct BinaryMetrics {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::optional<double> precision;  // TP / (TP + FP)
    std::optional<double> recall;     // TP / (TP + FN)
    std::optional<double> f1;         // harmonic mean, defined when both are
    std::optional<double> accuracy;   // (TP + TN) / total
};

inline BinaryMetrics metrics(const ConfusionMatrix& cm, std::size_t positive_class = 1) {
    require(cm.k == 2, "metrics: expected a 2-class confusion matrix, got k=" + std::to_string(cm.k));
    require(positive_class < 2, "metrics: positive class must be 0 or 1");
    std::size_t neg = 1 - positive_class;
    BinaryMetrics m;
    m.tp = cm.at(positive_class, positive_class);
    m.fp = cm.at(neg, positive_class);
    m.fn = cm.at(positive_class, neg);
    m.tn = cm.at(neg, neg);
    if (m.tp + m.fp > 0) m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    if (m.tp + m.fn > 0) m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0)
        m.f1 = 2.0 * (*m.precision) * (*m.recall) / (*m.precision + *m.recall);
    std::size_t total = m.tp + m.fp + m.tn + m.fn;
    if (total > 0) m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(total);
    return m;
}

/// Multi-class accuracy plus macro-averaged one-vs-rest precision/recall/f1,
/// used for the sign classifier's epoch history.
struct MacroMetrics {
    std::optional<double> precision, recall, f1, accuracy;
};

inline MacroMetrics macro_metrics(const ConfusionMatrix& cm) {
    MacroMetrics out;
    std::size_t total = cm.total(), diag = 0;
    for (std::size_t c = 0; c < cm.k; ++c) diag += cm.at(c, c);
    if (total > 0) out.accuracy = static_cast<double>(diag) / static_cast<double>(total);
    double psum = 0, rsum = 0, fsum = 0;
    std::size_t pn = 0, rn = 0, fn2 = 0;
    for (std::size_t c = 0; c < cm.k; ++c) {
        std::size_t tp = cm.at(c, c), fp = 0, fnn = 0;
        for (std::size_t o = 0; o < cm.k; ++o) {
            if (o == c) continue;
            fp += cm.at(o, c);
            fnn += cm.at(c, o);
        }
        if (tp + fp > 0) {
            psum += static_cast<double>(tp) / static_cast<double>(tp + fp);
            ++pn;
        }
        if (tp + fnn > 0) {
            rsum += static_cast<double>(tp) / static_cast<double>(tp + fnn);
            ++rn;
        }
        double p = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        double r = tp + fnn > 0 ? static_cast<double>(tp) / (tp + fnn) : 0.0;
        if (p + r > 0) {
            fsum += 2 * p * r / (p + r);
            ++fn2;
        }
    }
    if (pn) out.precision = psum / static_cast<double>(pn);
    if (rn) out.recall = rsum / static_cast<double>(rn);
    if (fn2) out.f1 = fsum / static_cast<double>(fn2);
    return out;
}

// ---------------------------------------------------------------------------
// Parameter counting and memory estimation. Trainable values are the weights
// and biases of linear/conv layers, batch-norm gamma/beta, and quantum
// circuit angles; running statistics are buffers and never counted.
// ---------------------------------------------------------------------------

inline std::size_t count_params(const ParamStore& params) { return params.trainable_count(); }

/// Closed-form count for a fully connected stack with biases:
/// sum of consecutive width products plus all non-input widths.
inline std::size_t dense_param_formula(const std::vector<std::size_t>& widths) {
    require(widths.size() >= 2, "dense formula: need input and output widths");
    std::size_t total = 0;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) total += widths[i] * widths[i + 1];
    for (std::size_t i = 1; i < widths.size(); ++i) total += widths[i];
    return total;
}

/// Memory in MB at 4 bytes per parameter, rounded half-up to 3 decimals.
/// 4*n/1048576 * 1000 = 125*n/32768, so the rounding is done exactly in
/// integer arithmetic.
inline std::uint64_t memory_milli_mb(std::uint64_t n_params) {
    return (125ull * n_params + 16384ull) / 32768ull;
}

inline double memory_mb(std::uint64_t n_params) {
    return static_cast<double>(memory_milli_mb(n_params)) / 1000.0;
}

inline std::string memory_mb_str(std::uint64_t n_params) {
    std::uint64_t milli = memory_milli_mb(n_params);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%llu.%03llu", static_cast<unsigned long long>(milli / 1000),
                  static_cast<unsigned long long>(milli % 1000));
    return buf;
}

// ---------------------------------------------------------------------------
// Report emission: a plain-text table, a comma-separated file, and a
// line-delimited JSON record file, all byte-deterministic.
// ---------------------------------------------------------------------------

struct MetricRow {
    std::string model;
    std::string sign_class;
    BinaryMetrics m;
};

struct ParamRow {
    std::string model;
    std::size_t n_params = 0;
};

struct Report {
    std::vector<MetricRow> metrics;
    std::vector<ParamRow> params;
};

namespace detail {

inline std::string fmt_metric(const std::optional<double>& v) {
    if (!v) return "undefined";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *v);
    return buf;
}

}  // namespace detail

inline void emit_report(const Report& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    require(std::filesystem::is_directory(dir), "emit_report: cannot create directory " + dir.string());

    // Plain-text table.
    {
        std::ofstream txt(dir / "report.txt");
        require(txt.good(), "emit_report: cannot write " + (dir / "report.txt").string());
        txt << "model  class  tp fp tn fn  precision recall f1 accuracy\n";
        for (const auto& r : report.metrics) {
            txt << r.model << "  " << r.sign_class << "  " << r.m.tp << " " << r.m.fp << " " << r.m.tn
                << " " << r.m.fn << "  " << detail::fmt_metric(r.m.precision) << " "
                << detail::fmt_metric(r.m.recall) << " " << detail::fmt_metric(r.m.f1) << " "
                << detail::fmt_metric(r.m.accuracy) << "\n";
        }
        txt << "\nmodel  parameters  memory_mb\n";
        for (const auto& p : report.params)
            txt << p.model << "  " << p.n_params << "  " << memory_mb_str(p.n_params) << "\n";
        require(txt.good(), "emit_report: write failed in " + dir.string());
    }

    // Comma-separated values.
    {
        std::ofstream csv(dir / "report.csv");
        require(csv.good(), "emit_report: cannot write " + (dir / "report.csv").string());
        csv << "model,class,tp,fp,tn,fn,precision,recall,f1,accuracy\n";
        for (const auto& r : report.metrics) {
            csv << r.model << "," << r.sign_class << "," << r.m.tp << "," << r.m.fp << "," << r.m.tn
                << "," << r.m.fn << "," << detail::fmt_metric(r.m.precision) << ","
                << detail::fmt_metric(r.m.recall) << "," << detail::fmt_metric(r.m.f1) << ","
                << detail::fmt_metric(r.m.accuracy) << "\n";
        }
        require(csv.good(), "emit_report: write failed in " + dir.string());
    }
    {
        std::ofstream csv(dir / "params.csv");
        require(csv.good(), "emit_report: cannot write " + (dir / "params.csv").string());
        csv << "model,parameters,memory_mb\n";
        for (const auto& p : report.params)
            csv << p.model << "," << p.n_params << "," << memory_mb_str(p.n_params) << "\n";
        require(csv.good(), "emit_report: write failed in " + dir.string());
    }

    // Line-delimited structured records.
    {
        std::ofstream jsonl(dir / "report.jsonl");
        require(jsonl.good(), "emit_report: cannot write " + (dir / "report.jsonl").string());
        auto put = [](nlohmann::json& j, const char* key, const std::optional<double>& v) {
            if (v)
                j[key] = *v;
            else
                j[key] = nullptr;
        };
        for (const auto& r : report.metrics) {
            nlohmann::json j;
            j["record"] = "metrics";
            j["model"] = r.model;
            j["class"] = r.sign_class;
            j["tp"] = r.m.tp;
            j["fp"] = r.m.fp;
            j["tn"] = r.m.tn;
            j["fn"] = r.m.fn;
            put(j, "precision", r.m.precision);
            put(j, "recall", r.m.recall);
            put(j, "f1", r.m.f1);
            put(j, "accuracy", r.m.accuracy);
            jsonl << j.dump() << "\n";
        }
        for (const auto& p : report.params) {
            nlohmann::json j;
            j["record"] = "params";
            j["model"] = p.model;
            j["parameters"] = p.n_params;
            j["memory_mb"] = memory_mb_str(p.n_params);
            jsonl << j.dump() << "\n";
        }
        require(jsonl.good(), "emit_report: write failed in " + dir.string());
    }
}

}  // namespace signet
