#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dras/dras.hpp"

namespace dras::cli {

/// Process exit codes.
enum ExitCode : int {
    kSuccess = 0,
    kInputError = 1,
    kNotConverged = 2,
    kInfeasible = 3,
    kNumericalError = 4,
};

inline int exit_code_for(const Error& e) {
    switch (e.error_class()) {
        case ErrorClass::Input: return kInputError;
        case ErrorClass::Infeasible: return kInfeasible;
        case ErrorClass::Numerical: return kNumericalError;
    }
    return kInputError;
}

namespace detail {

/// Human-readable numbers: 6 significant digits.
inline std::string human(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

inline OrderPolicy parse_order(const std::string& text, std::uint64_t seed, std::size_t rank) {
    if (text == "ascending") return FixedAscending{};
    if (text == "random") return RandomPerIteration{seed};
    if (text == "descending") {
        FixedCustom custom;
        for (std::size_t d = rank; d-- > 0;) custom.order.push_back(d);
        return custom;
    }
    FixedCustom custom;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            custom.order.push_back(std::stoul(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InvalidArgument("--order expects ascending, descending, random or a comma list "
                                  "of dimension indices, got '" + text + "'");
        }
    }
    return custom;
}

inline TerminationMode parse_termination(const std::string& text) {
    if (text == "any") return TerminationMode::Any;
    if (text == "iterations") return TerminationMode::Iterations;
    if (text == "delta") return TerminationMode::Delta;
    if (text == "margin") return TerminationMode::MarginResidual;
    throw InvalidArgument("--termination expects any, iterations, delta or margin, got '" + text + "'");
}

inline CoefficientConvention parse_convention(const std::string& text) {
    if (text == "total-resources") return CoefficientConvention::TotalResources;
    if (text == "row-total") return CoefficientConvention::RowTotal;
    throw InvalidArgument("--convention expects total-resources or row-total, got '" + text + "'");
}

template <class Policy>
void print_matrix(const BasicTensor<Policy>& t, std::ostream& out) {
    if (t.rank() != 2) {
        write_tensor(t, out);
        return;
    }
    const std::size_t rows = t.shape()[0], cols = t.shape()[1];
    std::size_t width = 12;
    for (const auto& label : t.dim(0).labels) width = std::max(width, label.size() + 1);
    for (const auto& label : t.dim(1).labels) width = std::max(width, label.size() + 1);
    out << pad("", width);
    for (const auto& label : t.dim(1).labels) out << pad(label, width);
    out << '\n';
    for (std::size_t i = 0; i < rows; ++i) {
        out << pad(t.dim(0).labels[i], width);
        for (std::size_t j = 0; j < cols; ++j) out << pad(human(t.values()[i * cols + j]), width);
        out << '\n';
    }
}

inline nlohmann::json matrix_json(std::span<const double> values, std::size_t rows, std::size_t cols) {
    auto m = nlohmann::json::array();
    for (std::size_t i = 0; i < rows; ++i) {
        auto row = nlohmann::json::array();
        for (std::size_t j = 0; j < cols; ++j) row.push_back(values[i * cols + j]);
        m.push_back(std::move(row));
    }
    return m;
}

template <class Policy>
nlohmann::json tensor_json(const BasicTensor<Policy>& t) {
    nlohmann::json j;
    j["dims"] = nlohmann::json::array();
    for (const auto& dim : t.dims()) j["dims"].push_back({{"name", dim.name}, {"labels", dim.labels}});
    j["values"] = std::vector<double>(t.values().begin(), t.values().end());
    return j;
}

inline void write_text(const std::optional<std::string>& path, const std::string& text, std::ostream& out) {
    if (!path) {
        out << text;
        return;
    }
    std::ofstream file(*path, std::ios::binary | std::ios::trunc);
    if (!file) throw ParseError(*path, 0, "cannot open file for writing");
    file << text;
}

struct BalanceArgs {
    std::string tensor, margins, output;
    std::optional<std::string> diagnostics;
    std::size_t max_iter = 10'000;
    double delta = 0.0;
    double margin_tol = 1e-8;
    double compat_tol = 1e-6;
    std::string order = "ascending";
    std::uint64_t seed = 0;
    std::string termination = "any";
    bool no_timing = false;
};

inline int cmd_balance(const BalanceArgs& args, std::ostream& out, std::ostream& err) {
    const Tensor m = read_tensor(args.tensor);
    const MarginSet margins = read_margins(args.margins, &m.dims());
    BalanceConfig config;
    config.max_iterations = args.max_iter;
    config.delta_threshold = args.delta;
    config.margin_threshold = args.margin_tol;
    config.compatibility_tolerance = args.compat_tol;
    config.order = parse_order(args.order, args.seed, m.rank());
    config.termination = parse_termination(args.termination);

    const auto start = std::chrono::steady_clock::now();
    const BalanceResult result = balance(m, margins, config);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

    write_tensor(result.solution, std::filesystem::path(args.output));

    nlohmann::ordered_json diag;
    diag["iterations"] = result.iterations_run;
    diag["final_delta"] = result.final_delta;
    diag["final_margin_residual"] = result.final_margin_residual;
    diag["margin_threshold"] = config.margin_threshold;
    diag["termination_reason"] = to_string(result.termination_reason);
    diag["converged"] = result.converged;
    if (!args.no_timing) diag["wall_time_seconds"] = elapsed.count();
    write_text(args.diagnostics, diag.dump(2) + "\n", out);

    if (!result.converged) {
        err << "not converged after " << result.iterations_run << " iterations; margin residual "
            << format_number(result.final_margin_residual) << " >= " << format_number(config.margin_threshold)
            << "\n";
        return kNotConverged;
    }
    return kSuccess;
}

inline int cmd_check_margins(const std::string& manifest, double relative_tol, bool json,
                             std::ostream& out) {
    const MarginSet margins = read_margins(manifest);
    const double grand_total = margins.rank() > 0 ? margins[0].sum() : 0.0;
    const double tolerance = relative_tol * grand_total;
    const auto violations = check_margin_compatibility(margins, tolerance);
    if (json) {
        nlohmann::ordered_json j;
        j["compatible"] = violations.empty();
        j["tolerance"] = tolerance;
        j["violations"] = nlohmann::json::array();
        for (const auto& v : violations)
            j["violations"].push_back(
                {{"d", v.d}, {"e", v.e}, {"index", v.index}, {"lhs", v.lhs}, {"rhs", v.rhs}});
        out << j.dump(2) << '\n';
    } else if (violations.empty()) {
        out << "compatible (tolerance " << human(tolerance) << ")\n";
    } else {
        out << violations.size() << " violation(s) (tolerance " << human(tolerance) << ")\n";
        for (const auto& v : violations)
            out << "  margins " << v.d << " vs " << v.e << " at " << dras::detail::to_string(v.index)
                << ": " << human(v.lhs) << " vs " << human(v.rhs) << '\n';
    }
    return violations.empty() ? kSuccess : kInputError;
}

inline int cmd_compare(const std::vector<std::string>& files, std::vector<std::string> names, bool json,
                       std::ostream& out) {
    if (!names.empty() && names.size() != files.size())
        throw InvalidArgument("--names needs one name per file");
    std::vector<std::pair<std::string, Tensor>> tables;
    for (std::size_t k = 0; k < files.size(); ++k) {
        Tensor t = read_tensor(files[k]);
        const auto& first = tables.empty() ? t.dims() : tables.front().second.dims();
        const bool same_axes = t.rank() == first.size() &&
                               std::equal(first.begin(), first.end(), t.dims().begin(),
                                          [](const Dim& a, const Dim& b) { return a.name == b.name; });
        if (k > 0 && same_axes) {
            // Align labels to the first table so distances compare like with like.
            t = read_tensor(files[k], &tables.front().second.dims());
        }
        tables.emplace_back(names.empty() ? std::filesystem::path(files[k]).stem().string() : names[k],
                            std::move(t));
    }
    const DistanceMatrix dm = distance_matrix(tables);
    const std::size_t n = dm.names.size();
    if (json) {
        nlohmann::ordered_json j;
        j["names"] = dm.names;
        j["distances"] = matrix_json(dm.distances, n, n);
        out << j.dump(2) << '\n';
        return kSuccess;
    }
    std::size_t width = 12;
    for (const auto& name : dm.names) width = std::max(width, name.size() + 1);
    out << pad("", width);
    for (const auto& name : dm.names) out << pad(name, width);
    out << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        out << pad(dm.names[i], width);
        for (std::size_t j = 0; j < n; ++j) out << pad(human(dm.at(i, j)), width);
        out << '\n';
    }
    return kSuccess;
}

struct DeviationArgs {
    std::string reference, estimate;
    std::optional<std::string> output;
    std::string zero_policy = "both-zero";
    std::vector<double> thresholds = default_deviation_thresholds();
    bool json = false;
};

inline int cmd_deviations(const DeviationArgs& args, std::ostream& out) {
    const Tensor reference = read_tensor(args.reference);
    const Tensor estimate = read_tensor(args.estimate, &reference.dims());
    ZeroPolicy policy;
    if (args.zero_policy == "both-zero")
        policy = ZeroPolicy::ZeroIfBothZero;
    else if (args.zero_policy == "flag")
        policy = ZeroPolicy::FlagAll;
    else
        throw InvalidArgument("--zero-policy expects both-zero or flag, got '" + args.zero_policy + "'");
    const DeviationReport report = relative_deviation(
        reference, estimate, policy, args.thresholds, std::filesystem::path(args.reference).stem().string(),
        std::filesystem::path(args.estimate).stem().string());
    if (args.output) write_tensor(report.relative_deviation, std::filesystem::path(*args.output));

    const DeviationSummary& s = report.summary;
    if (args.json) {
        nlohmann::ordered_json j;
        j["reference"] = report.reference_name;
        j["estimate"] = report.estimate_name;
        j["max_abs_relative"] = s.max_abs_relative;
        j["mean_abs_relative"] = s.mean_abs_relative;
        j["frobenius_of_difference"] = s.frobenius_of_difference;
        j["flagged_cells"] = s.flagged_cells;
        j["exceeding"] = nlohmann::json::array();
        for (const auto& bucket : s.exceeding)
            j["exceeding"].push_back({{"threshold", bucket.threshold}, {"cells", bucket.cells}});
        j["grid"] = tensor_json(report.relative_deviation);
        out << j.dump(2) << '\n';
        return kSuccess;
    }
    out << "relative deviation of " << report.estimate_name << " vs " << report.reference_name << '\n'
        << "  max |dev|         " << human(s.max_abs_relative) << '\n'
        << "  mean |dev|        " << human(s.mean_abs_relative) << '\n'
        << "  frobenius(diff)   " << human(s.frobenius_of_difference) << '\n'
        << "  flagged cells     " << s.flagged_cells << '\n';
    for (const auto& bucket : s.exceeding)
        out << "  |dev| > " << human(bucket.threshold) << "  " << bucket.cells << " cell(s)\n";
    if (!args.output) print_matrix(report.relative_deviation, out);
    return kSuccess;
}

inline SignedTensor leontief_from(const std::optional<std::string>& coefficients,
                                  const std::optional<std::string>& io, const std::string& convention,
                                  std::ostream& err, std::optional<IOTable>* table_out = nullptr) {
    CoefficientMatrix a;
    if (coefficients && io) throw InvalidArgument("give either --coefficients or --io, not both");
    if (coefficients) {
        a.a = read_tensor(*coefficients);
    } else if (io) {
        IOTable table = read_io_table(read_io_manifest(*io));
        a = technical_coefficients(table, parse_convention(convention));
        if (table_out) *table_out = std::move(table);
    } else {
        throw InvalidArgument("one of --coefficients or --io is required");
    }
    for (const auto& warning : spectral_warnings(a)) err << "warning: " << warning << '\n';
    return leontief_inverse(a);
}

inline int cmd_leontief(const std::optional<std::string>& coefficients, const std::optional<std::string>& io,
                        const std::string& convention, const std::optional<std::string>& output, bool json,
                        std::ostream& out, std::ostream& err) {
    const SignedTensor l = leontief_from(coefficients, io, convention, err);
    if (output) write_tensor(l, std::filesystem::path(*output));
    if (json)
        out << nlohmann::ordered_json{{"leontief", tensor_json(l)}}.dump(2) << '\n';
    else if (!output)
        print_matrix(l, out);
    return kSuccess;
}

inline int cmd_predict(const std::optional<std::string>& leontief, const std::optional<std::string>& io,
                       const std::string& convention, const std::optional<std::string>& final_demand,
                       const std::optional<std::string>& output, bool json, std::ostream& out,
                       std::ostream& err) {
    SignedTensor l;
    std::optional<IOTable> table;
    if (leontief && io) throw InvalidArgument("give either --leontief or --io, not both");
    if (leontief)
        l = read_tensor<AnySign>(*leontief);
    else
        l = leontief_from(std::nullopt, io, convention, err, &table);
    if (l.rank() != 2) throw ShapeMismatch("Leontief inverse must be two-dimensional");

    std::vector<double> v1;
    if (final_demand)
        v1 = read_vector(*final_demand, l.dim(1));
    else if (table)
        v1.assign(table->v1().begin(), table->v1().end());
    else
        throw InvalidArgument("--final-demand is required with --leontief");

    const auto p = predict_resources(l, v1);
    const SignedTensor result({l.dim(0)}, p);
    if (output) write_tensor(result, std::filesystem::path(*output));
    if (json)
        out << nlohmann::ordered_json{{"total_resources", tensor_json(result)}}.dump(2) << '\n';
    else if (!output)
        write_tensor(result, out);
    return kSuccess;
}

}  // namespace detail

/// Runs the command line `args` (args[0] is the program name).
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multidimensional RAS balancing and input-output analysis", "dras"};
    app.require_subcommand(1);

    detail::BalanceArgs bal;
    auto* balance_cmd = app.add_subcommand("balance", "Balance a tensor against its margin totals");
    balance_cmd->add_option("--tensor", bal.tensor, "Initial tensor (long-format CSV)")->required();
    balance_cmd->add_option("--margins", bal.margins, "Margin manifest (JSON)")->required();
    balance_cmd->add_option("--output", bal.output, "Where to write the solution")->required();
    balance_cmd->add_option("--diagnostics", bal.diagnostics, "Diagnostics JSON path (default: stdout)");
    balance_cmd->add_option("--max-iter", bal.max_iter, "Maximum number of sweeps")->capture_default_str();
    balance_cmd->add_option("--delta", bal.delta, "Stop when consecutive sweeps differ by less (0 disables)")
        ->capture_default_str();
    balance_cmd->add_option("--margin-tol", bal.margin_tol, "Stop when the margin residual is below this")
        ->capture_default_str();
    balance_cmd->add_option("--compat-tol", bal.compat_tol, "Margin compatibility tolerance, relative to the grand total")
        ->capture_default_str();
    balance_cmd->add_option("--order", bal.order, "ascending, descending, random, or e.g. 2,0,1")
        ->capture_default_str();
    balance_cmd->add_option("--seed", bal.seed, "Seed for --order random")->capture_default_str();
    balance_cmd->add_option("--termination", bal.termination, "any, iterations, delta or margin")
        ->capture_default_str();
    balance_cmd->add_flag("--no-timing", bal.no_timing, "Omit wall time from diagnostics");

    std::string check_manifest;
    double check_tol = 1e-6;
    bool check_json = false;
    auto* check_cmd = app.add_subcommand("check-margins", "Check pairwise margin compatibility");
    check_cmd->add_option("--margins", check_manifest, "Margin manifest (JSON)")->required();
    check_cmd->add_option("--tolerance", check_tol, "Tolerance relative to the grand total")->capture_default_str();
    check_cmd->add_flag("--json", check_json);

    std::vector<std::string> compare_files, compare_names;
    bool compare_json = false;
    auto* compare_cmd = app.add_subcommand("compare", "Pairwise Frobenius distances between tables");
    compare_cmd->add_option("files", compare_files, "Tables (long-format CSV)")->required();
    compare_cmd->add_option("--names", compare_names, "Display names, one per file");
    compare_cmd->add_flag("--json", compare_json);

    detail::DeviationArgs dev;
    auto* dev_cmd = app.add_subcommand("deviations", "Relative deviation of an estimate from a reference");
    dev_cmd->add_option("--reference", dev.reference)->required();
    dev_cmd->add_option("--estimate", dev.estimate)->required();
    dev_cmd->add_option("--output", dev.output, "Write the deviation grid here (long-format CSV)");
    dev_cmd->add_option("--zero-policy", dev.zero_policy, "both-zero or flag")->capture_default_str();
    dev_cmd->add_option("--thresholds", dev.thresholds, "Count cells with |dev| above each value");
    dev_cmd->add_flag("--json", dev.json);

    std::optional<std::string> coefficients, io, output, leontief_path, final_demand;
    std::string convention = "total-resources";
    bool leontief_json = false, predict_json = false;
    auto* leontief_cmd = app.add_subcommand("leontief", "Leontief inverse (I - A)^-1");
    leontief_cmd->add_option("--coefficients", coefficients, "Technical coefficient matrix A");
    leontief_cmd->add_option("--io", io, "IO table manifest (JSON)");
    leontief_cmd->add_option("--convention", convention, "total-resources or row-total")->capture_default_str();
    leontief_cmd->add_option("--output", output);
    leontief_cmd->add_flag("--json", leontief_json);

    auto* predict_cmd = app.add_subcommand("predict", "Total resources from final demand, p = L v1");
    predict_cmd->add_option("--leontief", leontief_path, "Leontief inverse L");
    predict_cmd->add_option("--io", io, "IO table manifest (JSON)");
    predict_cmd->add_option("--convention", convention, "total-resources or row-total")->capture_default_str();
    predict_cmd->add_option("--final-demand", final_demand, "Final demand vector v1");
    predict_cmd->add_option("--output", output);
    predict_cmd->add_flag("--json", predict_json);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kInputError;
    }

    try {
        if (balance_cmd->parsed()) return detail::cmd_balance(bal, out, err);
        if (check_cmd->parsed()) return detail::cmd_check_margins(check_manifest, check_tol, check_json, out);
        if (compare_cmd->parsed()) return detail::cmd_compare(compare_files, compare_names, compare_json, out);
        if (dev_cmd->parsed()) return detail::cmd_deviations(dev, out);
        if (leontief_cmd->parsed())
            return detail::cmd_leontief(coefficients, io, convention, output, leontief_json, out, err);
        if (predict_cmd->parsed())
            return detail::cmd_predict(leontief_path, io, convention, final_demand, output, predict_json, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
    return kInputError;
}

}  // namespace dras::cli
