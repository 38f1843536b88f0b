#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fpk/sampling.hpp"

namespace fpk {

enum class Status { Pass, Fail, NonUniform };
const char* to_string(Status s);

struct CheckRecord {
    std::string name;
    std::string label;  // short tag of the identity or condition being checked
    Status status = Status::Pass;
    double max_residual = 0.0;
    double tolerance = 0.0;
    std::optional<std::vector<double>> witness;
    std::string note;

    bool pass() const { return status == Status::Pass; }
};

// pass iff residual < tol; the witness is the worst point otherwise.
CheckRecord make_check(std::string name, std::string label, const MaxAbs& m, double tol,
                       const PointSet& pts);
CheckRecord make_check(std::string name, std::string label, double residual, double tol,
                       std::optional<std::vector<double>> witness = std::nullopt);

struct Report {
    std::string tool_version = "0.1.0";
    std::string spec_digest;
    SampleProtocol protocol;
    std::vector<CheckRecord> records;
    std::vector<std::pair<std::string, std::string>> info;  // free-form key/value lines

    bool all_pass() const;
    void add(CheckRecord r) { records.push_back(std::move(r)); }
    void add(const std::vector<CheckRecord>& rs) { records.insert(records.end(), rs.begin(), rs.end()); }
    const CheckRecord* find(const std::string& name) const;

    std::string to_json() const;  // sorted keys, byte-stable
    std::string to_text() const;
};

double worst(const std::vector<CheckRecord>& rs);

}  // namespace fpk
