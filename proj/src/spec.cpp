#include "fpk/spec.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fpk {

using json = nlohmann::json;

namespace {

using U = std::size_t;

std::string fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

[[noreturn]] void fail(const std::string& where, const std::string& what) { throw SpecError(where + ": " + what); }

std::vector<int> parse_index(const std::string& key, const std::string& where) {
    std::vector<int> out;
    std::stringstream ss(key);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            const int v = std::stoi(part, &used);
            while (used < part.size() && part[used] == ' ') ++used;
            if (used != part.size()) throw std::invalid_argument(part);
            out.push_back(v);
        } catch (const std::exception&) {
            fail(where, "index tuple \"" + key + "\" is not a comma-joined list of integers");
        }
    }
    if (out.empty()) fail(where, "empty index tuple");
    return out;
}

Expr parse_component(const json& v, const std::vector<std::string>& names, const std::string& where) {
    if (v.is_number()) return Expr(v.get<double>());
    if (!v.is_string()) fail(where, "component must be an expression string or a number");
    const auto text = v.get<std::string>();
    try {
        return parse_expr(text, names);
    } catch (const SyntaxError& e) {
        fail(where, "cannot parse \"" + text + "\" at position " + std::to_string(e.position()) + ": " + e.what());
    } catch (const Error& e) {
        fail(where, "cannot parse \"" + text + "\": " + e.what());
    }
}

const json& member(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) fail(where, std::string("missing \"") + key + "\"");
    return obj.at(key);
}

template <Variance V>
Alt<V> parse_alt(const json& comps, const ChartPtr& chart, int degree, const std::string& where) {
    if (!comps.is_object()) fail(where, "components must be an object keyed by index tuples");
    Alt<V> out(chart, degree);
    const int n = static_cast<int>(chart->dim());
    for (const auto& [key, val] : comps.items()) {
        const auto where_k = where + " component \"" + key + "\"";
        auto idx = parse_index(key, where_k);
        if (static_cast<int>(idx.size()) != degree)
            fail(where_k, "expected " + std::to_string(degree) + " indices");
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (idx[i] < 1 || idx[i] > n) fail(where_k, "index out of range 1.." + std::to_string(n));
            if (i > 0 && idx[i] <= idx[i - 1]) fail(where_k, "indices must be strictly increasing");
            --idx[i];
        }
        out.add(idx, parse_component(val, chart->names, where_k));
    }
    return out;
}

ChartPtr parse_chart(const json& c, const std::string& where) {
    const auto& coords = member(c, "coords", where);
    if (!coords.is_array() || coords.empty()) fail(where, "\"coords\" must be a nonempty array of names");
    std::vector<std::string> names;
    for (const auto& n : coords) {
        if (!n.is_string()) fail(where, "coordinate names must be strings");
        names.push_back(n.get<std::string>());
    }
    std::vector<std::pair<double, double>> dom(names.size(), {-1.0, 1.0});
    if (c.contains("domain")) {
        const auto& d = c.at("domain");
        auto interval = [&](const json& iv) {
            if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number() || !iv[1].is_number())
                fail(where, "domain intervals are [lo, hi] pairs of numbers");
            return std::pair<double, double>{iv[0].get<double>(), iv[1].get<double>()};
        };
        if (d.is_array() && d.size() == 2 && d[0].is_number()) {
            dom.assign(names.size(), interval(d));
        } else if (d.is_array() && d.size() == names.size()) {
            for (U i = 0; i < names.size(); ++i) dom[i] = interval(d[i]);
        } else {
            fail(where, "\"domain\" must be one [lo, hi] or one per coordinate");
        }
    }
    try {
        return make_chart(names, dom);
    } catch (const Error& e) {
        fail(where, e.what());
    }
}

// k×d1×d2 table from {"c,a,b": expr}; missing antisymmetric partners are filled.
Table3 parse_table(const json& obj, int d0, int d1, int d2, bool antisym, const std::vector<std::string>& names,
                   const std::string& where) {
    Table3 t = table3(d0, d1, d2);
    if (obj.is_null()) return t;
    if (!obj.is_object()) fail(where, "table must be an object keyed by \"c,a,b\"");
    std::set<std::vector<int>> given;
    for (const auto& [key, val] : obj.items()) {
        const auto where_k = where + " entry \"" + key + "\"";
        auto idx = parse_index(key, where_k);
        if (idx.size() != 3) fail(where_k, "expected three indices");
        const int lim[3] = {d0, d1, d2};
        for (int i = 0; i < 3; ++i)
            if (idx[U(i)] < 1 || idx[U(i)] > lim[i]) fail(where_k, "index out of range");
        for (auto& i : idx) --i;
        t[U(idx[0])][U(idx[1])][U(idx[2])] = parse_component(val, names, where_k);
        given.insert(idx);
    }
    if (antisym)
        for (const auto& idx : given) {
            const std::vector<int> sw{idx[0], idx[2], idx[1]};
            if (!given.count(sw)) t[U(sw[0])][U(sw[1])][U(sw[2])] = -t[U(idx[0])][U(idx[1])][U(idx[2])];
        }
    return t;
}

SpecStructure parse_structure(const json& s, const StructureSpec& spec, std::size_t pos) {
    std::string where = "structures[" + std::to_string(pos) + "]";
    if (!s.is_object()) fail(where, "each structure must be an object");
    SpecStructure out;
    out.kind = member(s, "kind", where).get<std::string>();
    out.name = s.contains("name") ? s.at("name").get<std::string>() : out.kind + std::to_string(pos + 1);
    where += " (" + out.name + ")";
    const auto& ch = spec.chart;
    const auto& names = ch->names;
    const int n = static_cast<int>(ch->dim());
    const auto sample = halton_points(*ch, {64, 0});

    if (out.kind == "bivector" || out.kind == "vector_field") {
        const int deg = out.kind == "bivector" ? 2 : 1;
        out.multivector = parse_alt<Variance::Contra>(member(s, "components", where), ch, deg, where);
    } else if (out.kind == "form") {
        const int deg = s.contains("degree") ? s.at("degree").get<int>() : 1;
        if (deg < 0 || deg > n) fail(where, "form degree out of range");
        out.form = parse_alt<Variance::Co>(member(s, "components", where), ch, deg, where);
    } else if (out.kind == "jacobi_pair") {
        try {
            if (s.contains("contact_form")) {
                out.pair = from_contact(parse_alt<Variance::Co>(s.at("contact_form"), ch, 1, where + " contact_form"),
                                        sample);
            } else if (s.contains("lcs")) {
                const auto& l = s.at("lcs");
                out.pair = from_lcs(parse_alt<Variance::Co>(member(l, "omega", where), ch, 2, where + " omega"),
                                    parse_alt<Variance::Co>(member(l, "epsilon", where), ch, 1, where + " epsilon"),
                                    sample);
            } else {
                out.pair = make_jacobi_pair(
                    parse_alt<Variance::Contra>(member(s, "lambda", where), ch, 2, where + " lambda"),
                    parse_alt<Variance::Contra>(member(s, "e", where), ch, 1, where + " e"));
            }
        } catch (const NotContact& e) {
            fail(where, e.what());
        } catch (const NotLCS& e) {
            fail(where, e.what());
        }
    } else if (out.kind == "algebroid") {
        const int k = member(s, "rank", where).get<int>();
        if (k < 0) fail(where, "rank must be nonnegative");
        AlgebroidData d = AlgebroidData::zero(ch, k);
        auto tab = [&](const char* key, int d0, int d1, int d2, bool anti) {
            return parse_table(s.contains(key) ? s.at(key) : json(), d0, d1, d2, anti, names, where + " " + key);
        };
        d.alpha = tab("alpha", k, k, k, true);
        d.beta = tab("beta", k, k, n, false);
        d.gamma_f = tab("gammaF", k, n, n, true);
        d.gamma_q = tab("gammaQ", n, n, n, true);
        if (s.contains("omega")) d.omega = parse_alt<Variance::Co>(s.at("omega"), ch, 2, where + " omega");
        if (s.contains("fiber_names")) {
            d.fiber_names = s.at("fiber_names").get<std::vector<std::string>>();
            if (static_cast<int>(d.fiber_names.size()) != k) fail(where, "one fiber name per rank");
        }
        out.algebroid = std::move(d);
    } else if (out.kind == "splitting_shift") {
        const auto& phi = member(s, "phi", where);
        if (!phi.is_object()) fail(where, "\"phi\" must be keyed by \"c,i\"");
        int k = s.contains("rank") ? s.at("rank").get<int>() : 0;
        for (const auto& [key, val] : phi.items()) k = std::max(k, parse_index(key, where)[0]);
        SplittingShift sh;
        sh.phi.assign(U(k), std::vector<Expr>(U(n)));
        for (const auto& [key, val] : phi.items()) {
            const auto where_k = where + " phi \"" + key + "\"";
            const auto idx = parse_index(key, where_k);
            if (idx.size() != 2 || idx[0] < 1 || idx[1] < 1 || idx[1] > n) fail(where_k, "bad index");
            sh.phi[U(idx[0] - 1)][U(idx[1] - 1)] = parse_component(val, names, where_k);
        }
        out.shift = std::move(sh);
    } else if (out.kind == "chart_map") {
        ChartMap m;
        m.source = ch;
        m.target = parse_chart(member(s, "target", where), where + " target");
        const auto& comps = member(s, "components", where);
        m.comps.assign(m.target->dim(), Expr());
        std::vector<bool> seen(m.target->dim(), false);
        for (const auto& [key, val] : comps.items()) {
            const auto where_k = where + " component \"" + key + "\"";
            const auto idx = parse_index(key, where_k);
            if (idx.size() != 1 || idx[0] < 1 || idx[0] > static_cast<int>(m.target->dim()))
                fail(where_k, "one target coordinate index expected");
            m.comps[U(idx[0] - 1)] = parse_component(val, names, where_k);
            seen[U(idx[0] - 1)] = true;
        }
        for (U i = 0; i < seen.size(); ++i)
            if (!seen[i]) fail(where, "no component for target coordinate " + m.target->names[i]);
        if (s.contains("expected"))
            out.expected = parse_alt<Variance::Contra>(s.at("expected"), m.target, 2, where + " expected");
        out.map = std::move(m);
    } else {
        fail(where, "unknown kind \"" + out.kind + "\"");
    }
    return out;
}

std::string prefixed(const std::string& name, const std::string& what) { return name + "/" + what; }

void add_prefixed(Report& r, const std::string& name, std::vector<CheckRecord> rs) {
    for (auto& c : rs) {
        c.name = prefixed(name, c.name);
        r.add(std::move(c));
    }
}

CheckRecord nonuniform_record(const std::string& name, const std::string& msg) {
    CheckRecord c;
    c.name = name;
    c.label = "uniform-verdict";
    c.status = Status::NonUniform;
    c.max_residual = 1.0;
    c.tolerance = 0.0;
    c.witness = std::vector<double>{};
    c.note = msg;
    return c;
}

const FoliatedChart& need_foliation(const StructureSpec& spec, const char* what) {
    if (!spec.foliation) throw SpecError(std::string(what) + " needs chart.leaf_coords");
    return *spec.foliation;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// Γ at the first few samples, one "at (...)" group per point.
std::string gamma_summary(const NormalBundle& h, const PointSet& pts) {
    std::ostringstream os;
    for (U k = 0; k < std::min<U>(pts.size(), 3); ++k) {
        const auto& x = pts[k];
        os << (k ? "; " : "") << "at (";
        for (U i = 0; i < x.size(); ++i) os << (i ? ", " : "") << fmt(x[i]);
        os << "):";
        for (U a = 0; a < h.gamma.size(); ++a)
            for (U u = 0; u < h.gamma[a].size(); ++u)
                os << " G[" << a + 1 << "][" << u + 1 << "]=" << fmt(h.gamma[a][u].eval(x.data()));
    }
    return os.str();
}

void coupling_for_bivector(Report& r, const SpecStructure& s, const StructureSpec& spec, const PointSet& pts,
                           double tol) {
    const auto& fol = need_foliation(spec, "coupling suite");
    const auto& p = *s.multivector;
    Classification cls;
    try {
        cls = classify_bivector(p, fol, spec.normal, pts, tol);
    } catch (const NonUniform& e) {
        r.add(nonuniform_record(prefixed(s.name, "classification"), e.what()));
        return;
    }
    r.info.emplace_back(prefixed(s.name, "classification"), to_string(cls.kind));
    if (cls.kind == FoliationClass::Coupling) {
        add_prefixed(r, s.name, verify_triple_conditions(extract_triple(p, fol, pts), pts, tol));
    } else if (cls.kind == FoliationClass::LeafTangent) {
        add_prefixed(r, s.name, check_leaf_tangent_poisson(p, fol, pts, tol));
    }
}

void coupling_for_pair(Report& r, const SpecStructure& s, const StructureSpec& spec, const PointSet& pts,
                       double tol) {
    const auto& fol = need_foliation(spec, "coupling suite");
    JacobiClassification cls;
    try {
        cls = classify_jacobi_coupling(*s.pair, fol, spec.normal, pts, tol, true);
    } catch (const NonUniform& e) {
        r.add(nonuniform_record(prefixed(s.name, "classification"), e.what()));
        return;
    }
    r.info.emplace_back(prefixed(s.name, "classification"),
                        cls.kind ? "jacobi coupling kind " + std::to_string(cls.kind) : "jacobi coupling none");
    if (cls.kind == 0) return;
    try {
        add_prefixed(r, s.name, verify_kind_conditions(*s.pair, fol, cls.kind, pts, tol));
    } catch (const KindMismatch& e) {
        r.info.emplace_back(prefixed(s.name, "kind_conditions"), e.what());
    }
}

CheckRecord map_record(const SpecStructure& s, const MultivectorField& p, const PointSet& pts, double tol) {
    const auto& m = *s.map;
    const auto pushed = pushforward(m, p, pts);
    double worst = 0.0;
    std::optional<std::vector<double>> at;
    for (const auto& ps : pushed) {
        std::map<Index, double> want;
        for (const auto& [k, e] : s.expected->components()) want[k] = e.eval(ps.target_point.data());
        std::set<Index> keys;
        for (const auto& [k, v] : want) keys.insert(k);
        for (const auto& [k, v] : ps.comps) keys.insert(k);
        for (const auto& k : keys) {
            const double a = ps.comps.count(k) ? ps.comps.at(k) : 0.0;
            const double b = want.count(k) ? want.at(k) : 0.0;
            if (std::abs(a - b) > worst) {
                worst = std::abs(a - b);
                at = ps.source_point;
            }
        }
    }
    return make_check(prefixed(s.name, "pushforward"), "chart-change-agreement", worst, tol, at);
}

}  // namespace

const SpecStructure* StructureSpec::first(const std::string& kind) const {
    for (const auto& s : structures)
        if (s.kind == kind) return &s;
    return nullptr;
}

std::vector<const SpecStructure*> StructureSpec::all(const std::string& kind) const {
    std::vector<const SpecStructure*> out;
    for (const auto& s : structures)
        if (s.kind == kind) out.push_back(&s);
    return out;
}

StructureSpec parse_spec(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SpecError(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw SpecError("spec must be a JSON object");
    StructureSpec spec;
    spec.digest = fnv1a(text);
    try {
        const auto& c = member(j, "chart", "spec");
        spec.chart = parse_chart(c, "chart");
        if (c.contains("leaf_coords")) {
            const auto leaf = c.at("leaf_coords").get<std::vector<std::string>>();
            try {
                spec.foliation = make_foliated(spec.chart, leaf);
            } catch (const Error& e) {
                fail("chart.leaf_coords", e.what());
            }
        }
        if (j.contains("normal_bundle")) {
            if (!spec.foliation) fail("normal_bundle", "needs chart.leaf_coords");
            NormalBundle h = NormalBundle::flat(*spec.foliation);
            const auto& g = member(j.at("normal_bundle"), "gamma", "normal_bundle");
            for (const auto& [key, val] : g.items()) {
                const auto where = "normal_bundle gamma \"" + key + "\"";
                const auto idx = parse_index(key, where);
                if (idx.size() != 2 || idx[0] < 1 || idx[0] > spec.foliation->q() || idx[1] < 1 ||
                    idx[1] > spec.foliation->p())
                    fail(where, "expected \"a,u\" with a a transverse and u a leaf position (1-based)");
                h.gamma[U(idx[0] - 1)][U(idx[1] - 1)] = parse_component(val, spec.chart->names, where);
            }
            spec.normal = std::move(h);
        }
        const auto& list = member(j, "structures", "spec");
        if (!list.is_array()) fail("structures", "must be an array");
        if (list.empty()) fail("structures", "empty structure list");
        for (std::size_t i = 0; i < list.size(); ++i) spec.structures.push_back(parse_structure(list[i], spec, i));
    } catch (const json::exception& e) {
        throw SpecError(std::string("invalid spec: ") + e.what());
    }
    return spec;
}

StructureSpec load_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_spec(ss.str());
}

std::string bivector_spec_json(const ChartPtr& chart, const std::vector<std::pair<std::string, MultivectorField>>& ps,
                               const std::vector<std::string>& leaf_coords) {
    json j;
    j["chart"]["coords"] = chart->names;
    json dom = json::array();
    for (const auto& [lo, hi] : chart->domain) dom.push_back({lo, hi});
    j["chart"]["domain"] = dom;
    if (!leaf_coords.empty()) j["chart"]["leaf_coords"] = leaf_coords;
    json list = json::array();
    for (const auto& [name, p] : ps) {
        json comps = json::object();
        for (const auto& [k, e] : p.components()) {
            std::string key;
            for (U i = 0; i < k.size(); ++i) key += (i ? "," : "") + std::to_string(k[i] + 1);
            comps[key] = e.str(chart->names);
        }
        list.push_back({{"kind", p.degree() == 1 ? "vector_field" : "bivector"}, {"name", name}, {"components", comps}});
    }
    j["structures"] = list;
    return j.dump(2) + "\n";
}

Suite parse_suite(const std::string& s) {
    if (s == "poisson") return Suite::Poisson;
    if (s == "jacobi") return Suite::Jacobi;
    if (s == "coupling") return Suite::Coupling;
    if (s == "tables") return Suite::Tables;
    if (s == "all") return Suite::All;
    throw SpecError("unknown suite \"" + s + "\" (poisson, jacobi, coupling, tables, all)");
}

VorobievCommand parse_vorobiev_command(const std::string& s) {
    if (s == "build") return VorobievCommand::Build;
    if (s == "coisotropy") return VorobievCommand::Coisotropy;
    if (s == "equivalence") return VorobievCommand::Equivalence;
    if (s == "linearize") return VorobievCommand::Linearize;
    throw SpecError("unknown vorobiev command \"" + s + "\" (build, coisotropy, equivalence, linearize)");
}

int exit_code(const Report& r) { return r.all_pass() ? kPass : kCheckFail; }

int exit_code_for(const std::exception& e) {
    if (const auto* fe = dynamic_cast<const Error*>(&e)) {
        static const std::set<std::string> input = {"SpecError", "SyntaxError", "UnknownSymbol", "ChartMismatch",
                                                    "DegreeError", "DomainError", "NotALeaf"};
        static const std::set<std::string> degenerate = {"Degenerate", "DegenerateSigma", "SingularJacobian",
                                                         "RankDrop", "IntegrationLeftDomain"};
        if (input.count(fe->kind())) return kInputError;
        if (degenerate.count(fe->kind())) return kDegenerate;
    }
    return kCheckFail;
}

Report run_check(const StructureSpec& spec, Suite suite, const RunOptions& opt) {
    Report r;
    r.spec_digest = spec.digest;
    r.protocol = opt.protocol;
    const auto pts = halton_points(*spec.chart, opt.protocol);
    const bool all = suite == Suite::All;
    bool touched = false;

    if (suite == Suite::Poisson || all)
        for (const auto* s : spec.all("bivector")) {
            const auto& p = *s->multivector;
            r.add(make_check(prefixed(s->name, "poisson"), "bracket-square", max_abs(schouten_bracket(p, p), pts),
                             opt.tol, pts));
            touched = true;
        }
    if (suite == Suite::Jacobi || all)
        for (const auto* s : spec.all("jacobi_pair")) {
            add_prefixed(r, s->name, check_jacobi(*s->pair, pts, opt.tol).records);
            touched = true;
        }
    if (suite == Suite::Coupling || all) {
        if (spec.foliation) {
            for (const auto* s : spec.all("bivector")) {
                coupling_for_bivector(r, *s, spec, pts, opt.tol);
                touched = true;
            }
            for (const auto* s : spec.all("jacobi_pair")) {
                coupling_for_pair(r, *s, spec, pts, opt.tol);
                touched = true;
            }
        }
        for (const auto* s : spec.all("algebroid")) {
            const auto base = halton_points(*s->algebroid->base, opt.protocol);
            add_prefixed(r, s->name, validate_algebroid(*s->algebroid, base, opt.tol));
            touched = true;
        }
        if (const auto* biv = spec.first("bivector"))
            for (const auto* s : spec.all("chart_map"))
                if (s->expected) {
                    r.add(map_record(*s, *biv->multivector, pts, opt.tol));
                    touched = true;
                }
    }
    if ((suite == Suite::Tables || all) && spec.foliation)
        for (const auto* s : spec.all("bivector")) {
            const auto& p = *s->multivector;
            NormalBundle h = NormalBundle::flat(*spec.foliation);
            std::string which = "flat";
            if (spec.normal) {
                h = *spec.normal;
                which = "given";
            } else {
                try {
                    h = coupling_normal_bundle(p, *spec.foliation, pts);
                    which = "coupling";
                } catch (const Error&) {
                }
            }
            r.info.emplace_back(prefixed(s->name, "tables_normal_bundle"), which);
            add_prefixed(r, s->name, verify_bigraded_tables(p, h, pts, opt.tol));
            touched = true;
        }
    if (!touched) throw SpecError("nothing in this spec for the selected suite");
    return r;
}

ClassifyResult run_classify(const StructureSpec& spec, const RunOptions& opt) {
    const auto& fol = need_foliation(spec, "classify");
    ClassifyResult out;
    auto& r = out.report;
    r.spec_digest = spec.digest;
    r.protocol = opt.protocol;
    const auto pts = halton_points(*spec.chart, opt.protocol);
    if (const auto* s = spec.first("bivector")) {
        const auto& p = *s->multivector;
        try {
            const auto cls = classify_bivector(p, fol, spec.normal, pts, opt.tol);
            out.verdict = to_string(cls.kind);
            if (cls.normal) r.info.emplace_back("normal_bundle", gamma_summary(*cls.normal, pts));
            if (cls.kind == FoliationClass::Coupling) {
                const auto t = extract_triple(p, fol, pts);
                r.info.emplace_back("triple", "leaf part, normal bundle and coupling form recovered");
                add_prefixed(r, s->name, verify_triple_conditions(t, pts, opt.tol));
            }
        } catch (const NonUniform& e) {
            out.verdict = "nonuniform";
            r.add(nonuniform_record(prefixed(s->name, "classification"), e.what()));
        }
        r.info.emplace_back("structure", s->name);
    } else if (const auto* s = spec.first("jacobi_pair")) {
        const auto cls = classify_jacobi_coupling(*s->pair, fol, spec.normal, pts, opt.tol);
        out.verdict = cls.kind ? "jacobi coupling kind " + std::to_string(cls.kind) : "jacobi coupling none";
        r.info.emplace_back("structure", s->name);
        r.info.emplace_back("pre_coupling", to_string(cls.pre_coupling));
        r.info.emplace_back("leaf_tangent_pair", to_string(cls.leaf_tangent_pair));
        r.info.emplace_back("e_type", to_string(cls.e_type));
        if (cls.almost_coupling) r.info.emplace_back("almost_coupling", to_string(*cls.almost_coupling));
        if (cls.normal) r.info.emplace_back("normal_bundle", gamma_summary(*cls.normal, pts));
        if (!cls.uniform) {
            out.verdict = "nonuniform";
            std::ostringstream os;
            for (const auto& [name, w] : cls.witnesses) os << name << " changes over the samples; ";
            r.add(nonuniform_record(prefixed(s->name, "classification"), os.str()));
        }
    } else {
        throw SpecError("classify needs a bivector or a jacobi_pair");
    }
    r.info.emplace_back("verdict", out.verdict);
    return out;
}

Report run_vorobiev(const StructureSpec& spec, VorobievCommand cmd, const VorobievOptions& vo,
                    const RunOptions& opt) {
    Report r;
    r.spec_digest = spec.digest;
    r.protocol = opt.protocol;
    r.info.emplace_back("sign", vo.sign == VorobievSign::Plus ? "plus" : "minus");

    if (cmd == VorobievCommand::Linearize) {
        const auto* s = spec.first("bivector");
        if (!s) throw SpecError("linearize needs a bivector");
        const auto& fol = need_foliation(spec, "linearize");
        const auto pts = halton_points(*spec.chart, {std::min<std::size_t>(opt.protocol.count, 32), opt.protocol.offset});
        const auto lin = linearize_at_leaf(*s->multivector, fol, pts, opt.tol);
        r.info.emplace_back("fiber_rank", std::to_string(lin.algebroid.rank));
        add_prefixed(r, s->name, linearization_checks(*s->multivector, lin, pts));
        return r;
    }

    const auto* a = spec.first("algebroid");
    if (!a) throw SpecError("vorobiev needs an algebroid block");
    const auto& d = *a->algebroid;
    const auto base_pts = halton_points(*d.base, opt.protocol);
    const auto* sh = spec.first("splitting_shift");
    if (sh && static_cast<int>(sh->shift->phi.size()) != d.rank)
        throw SpecError("splitting_shift needs one row per fiber coordinate");
    std::optional<SplittingShift> shift;
    if (sh) shift = *sh->shift;

    switch (cmd) {
        case VorobievCommand::Build: {
            add_prefixed(r, a->name, validate_algebroid(d, base_pts, opt.tol));
            const double t = shift ? vo.t : 0.0;
            const auto v = build_structure(d, shift, t, vo.sign, vo.fiber_radius, opt.protocol);
            r.info.emplace_back("fiber_radius", fmt(v.radius));
            r.info.emplace_back("t", fmt(t));
            const auto pts = halton_points(*v.p.chart(), opt.protocol);
            add_prefixed(r, a->name, structure_checks(d, v, pts, opt.tol));
            break;
        }
        case VorobievCommand::Coisotropy: {
            const auto rep = check_coisotropy_global(d, base_pts);
            r.info.emplace_back("coisotropic", rep.coisotropic ? "yes" : "no");
            r.info.emplace_back("sigma_nondegenerate_far", rep.sigma_nondegenerate_far ? "yes" : "no");
            add_prefixed(r, a->name, rep.records);
            break;
        }
        case VorobievCommand::Equivalence: {
            if (!shift) throw SpecError("equivalence needs a splitting_shift block");
            const SampleProtocol starts{std::min<std::size_t>(opt.protocol.count, 16), opt.protocol.offset};
            const auto fine = equivalence_flow(d, *shift, vo.sign, vo.steps, starts, 0.5, vo.fiber_radius);
            r.info.emplace_back("fiber_radius", fmt(fine.radius));
            r.info.emplace_back("steps", std::to_string(vo.steps));
            r.add(make_check(prefixed(a->name, "flow_endpoint"), "flow-pushforward", fine.residual, 1e-5));
            // order check away from the round-off floor
            const int coarse = std::max(1, vo.steps / 40);
            const auto c1 = equivalence_flow(d, *shift, vo.sign, coarse, starts, 0.5, fine.radius);
            const auto c2 = equivalence_flow(d, *shift, vo.sign, 2 * coarse, starts, 0.5, fine.radius);
            const bool exact = c1.residual < 1e-12 && c2.residual < 1e-12;
            const double ratio = c1.residual / std::max(c2.residual, 1e-300);
            auto rc = make_check(prefixed(a->name, "flow_order"), "step-halving-ratio", exact || ratio >= 8.0 ? 0.0 : 1.0,
                                 0.5);
            const std::string shown = exact ? "n/a" : fmt(ratio);
            rc.note = exact ? "integrator exact here: residual " + fmt(c1.residual) + " already at " +
                                  std::to_string(coarse) + " steps"
                            : "ratio " + shown + " at " + std::to_string(coarse) + " vs " + std::to_string(2 * coarse) +
                                  " steps";
            r.add(rc);
            r.info.emplace_back("convergence_ratio", shown);
            break;
        }
        case VorobievCommand::Linearize: break;
    }
    return r;
}

PoissonizeResult run_poissonize(const StructureSpec& spec, const RunOptions& opt) {
    const auto* s = spec.first("jacobi_pair");
    if (!s) throw SpecError("poissonize needs a jacobi_pair");
    PoissonizeResult out;
    auto& r = out.report;
    r.spec_digest = spec.digest;
    r.protocol = opt.protocol;
    const auto p = poissonize(*s->pair);
    const auto pts = halton_points(*p.chart(), opt.protocol);
    r.add(make_check(prefixed(s->name, "poissonized"), "homogeneous-poisson", max_abs(schouten_bracket(p, p), pts),
                     10.0 * opt.tol, pts));
    add_prefixed(r, s->name, check_jacobi(*s->pair, halton_points(*spec.chart, opt.protocol), opt.tol).records);
    std::vector<std::string> leaf;
    if (spec.foliation) {
        for (int u : spec.foliation->leaf) leaf.push_back(p.chart()->names[U(u)]);
        leaf.push_back(p.chart()->names.back());
    }
    out.spec_json = bivector_spec_json(p.chart(), {{s->name + "_poissonized", p}}, leaf);
    r.info.emplace_back("extended_coordinate", p.chart()->names.back());
    return out;
}

}  // namespace fpk
