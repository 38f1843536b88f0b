#include "fpk/report.hpp"

#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace fpk {

const char* to_string(Status s) {
    switch (s) {
        case Status::Pass: return "pass";
        case Status::Fail: return "fail";
        case Status::NonUniform: return "nonuniform";
    }
    return "fail";
}

CheckRecord make_check(std::string name, std::string label, const MaxAbs& m, double tol,
                       const PointSet& pts) {
    CheckRecord r;
    r.name = std::move(name);
    r.label = std::move(label);
    r.max_residual = m.value;
    r.tolerance = tol;
    r.status = m.value < tol ? Status::Pass : Status::Fail;
    if (!r.pass() && m.point < pts.size()) r.witness = pts[m.point];
    return r;
}

CheckRecord make_check(std::string name, std::string label, double residual, double tol,
                       std::optional<std::vector<double>> witness) {
    CheckRecord r;
    r.name = std::move(name);
    r.label = std::move(label);
    r.max_residual = residual;
    r.tolerance = tol;
    r.status = residual < tol ? Status::Pass : Status::Fail;
    if (!r.pass()) r.witness = witness ? *witness : std::vector<double>{};
    return r;
}

bool Report::all_pass() const {
    for (const auto& r : records)
        if (!r.pass()) return false;
    return true;
}

const CheckRecord* Report::find(const std::string& name) const {
    for (const auto& r : records)
        if (r.name == name) return &r;
    return nullptr;
}

double worst(const std::vector<CheckRecord>& rs) {
    double w = 0.0;
    for (const auto& r : rs) w = std::max(w, r.max_residual);
    return w;
}

namespace {
// Residuals are printed with fixed significant digits so reports do not
// depend on last-bit noise in the shortest round-trip representation.
std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6e", v);
    return buf;
}
}  // namespace

std::string Report::to_json() const {
    nlohmann::json j;
    j["tool_version"] = tool_version;
    j["spec_digest"] = spec_digest;
    j["sample_protocol"] = {{"count", protocol.count}, {"halton_offset", protocol.offset}};
    j["all_pass"] = all_pass();
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : records) {
        nlohmann::json o;
        o["name"] = r.name;
        o["label"] = r.label;
        o["status"] = to_string(r.status);
        o["max_residual"] = sci(r.max_residual);
        o["tolerance"] = sci(r.tolerance);
        if (r.witness) {
            nlohmann::json w = nlohmann::json::array();
            for (double v : *r.witness) w.push_back(sci(v));
            o["witness"] = w;
        }
        if (!r.note.empty()) o["note"] = r.note;
        recs.push_back(o);
    }
    j["records"] = recs;
    nlohmann::json inf = nlohmann::json::object();
    for (const auto& [k, v] : info) inf[k] = v;
    j["info"] = inf;
    return j.dump(2) + "\n";
}

std::string Report::to_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : info) os << k << ": " << v << "\n";
    for (const auto& r : records) {
        os << "[" << to_string(r.status) << "] " << r.name << " (" << r.label << ") residual "
           << sci(r.max_residual) << " tol " << sci(r.tolerance);
        if (r.witness && !r.witness->empty()) {
            os << " witness (";
            for (std::size_t i = 0; i < r.witness->size(); ++i) os << (i ? ", " : "") << (*r.witness)[i];
            os << ")";
        }
        if (!r.note.empty()) os << " -- " << r.note;
        os << "\n";
    }
    os << (all_pass() ? "all checks passed" : "some checks failed") << "\n";
    return os.str();
}

}  // namespace fpk
