#pragma once

// JSON and CSV output. JSON objects keep insertion order and numbers are
// written with 17 significant digits so identical runs give identical bytes
// (apart from the timestamp in the metadata block).

#include "convsync/certificate.hpp"
#include "convsync/conditions.hpp"
#include "convsync/simulate.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace convsync {

using Json = nlohmann::ordered_json;

std::string format_double(double x);  // "%.17g"; non-finite values become null in JSON
std::string dump_json(const Json& j);

/// 64-bit FNV-1a of the given bytes, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);
Json metadata(const std::string& config_source, const std::string& scenario);

Json to_json(const Vec& v);
Json to_json(const Mat& m);  // row-major nested arrays

Json to_json(const SteadyState& ss, const NetworkSpec& spec);
Json to_json(const EigenSplit& split);
Json to_json(const Certificate& cert);
Json to_json(const GammaDiagnostic& diag);
Json to_json(const ConditionReport& report);
Json to_json(const RoaEstimate& est);

/// RFC 4180: CRLF line ends, fields quoted when they contain a comma, quote
/// or line break.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    void row(const std::vector<std::string>& fields);
    void row(const std::vector<double>& values);
    std::string str() const { return out_; }

private:
    static std::string escape(const std::string& field);
    void write(const std::vector<std::string>& fields);
    std::size_t columns_;
    std::string out_;
};

std::string trajectory_csv(const Trajectory& traj, const StateLayout& layout);
/// Capacitor voltages of every node in the abc frame.
std::string trajectory_abc_csv(const Trajectory& traj, const StateLayout& layout, double omega_star);
std::string roa_samples_csv(const RoaEstimate& est);

void write_file(const std::string& path, const std::string& contents);

}  // namespace convsync
