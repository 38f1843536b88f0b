#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "fpk/spec.hpp"

namespace {

struct Common {
    std::string spec_path;
    std::string json_out;
    std::size_t points = 0;
    std::size_t offset = 0;
    double tol = 1e-9;
};

void add_common(CLI::App* cmd, Common& c, bool with_tol) {
    cmd->add_option("spec", c.spec_path, "structure spec (JSON)")->required();
    cmd->add_option("--json", c.json_out, "write the JSON report here (\"-\" for stdout)");
    cmd->add_option("--points", c.points, "sample count (default: FPK_POINTS or 64)");
    cmd->add_option("--offset", c.offset, "Halton offset");
    if (with_tol) cmd->add_option("--tol", c.tol, "residual tolerance");
}

fpk::RunOptions run_options(const Common& c) {
    fpk::RunOptions o;
    if (c.points) o.protocol.count = c.points;
    o.protocol.offset = c.offset;
    o.tol = c.tol;
    return o;
}

void write_text(const std::string& path, const std::string& text) {
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw fpk::SpecError("cannot write " + path);
    out << text;
}

// Human report on stdout unless the JSON goes there.
int emit(const fpk::Report& r, const Common& c) {
    if (c.json_out != "-") std::cout << r.to_text();
    if (!c.json_out.empty()) write_text(c.json_out, r.to_json());
    return fpk::exit_code(r);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fpk: coupling Poisson and Jacobi structures on foliated charts"};
    app.require_subcommand(1);
    app.set_version_flag("--version", fpk::Report{}.tool_version);

    Common check_c, classify_c, vor_c, poi_c;
    std::string suite = "all";
    auto* check = app.add_subcommand("check", "run residual suites");
    add_common(check, check_c, true);
    check->add_option("--suite", suite, "poisson|jacobi|coupling|tables|all");

    auto* classify = app.add_subcommand("classify", "classify against the spec foliation");
    add_common(classify, classify_c, true);

    std::string vcmd;
    std::string sign = "plus";
    fpk::VorobievOptions vo;
    double radius = 0.0;
    auto* vor = app.add_subcommand("vorobiev", "build, test and compare Vorobiev structures");
    vor->add_option("command", vcmd, "build|coisotropy|equivalence|linearize")->required();
    add_common(vor, vor_c, true);
    vor->add_option("--t", vo.t, "interpolation parameter for build");
    vor->add_option("--sign", sign, "plus|minus")->check(CLI::IsMember({"plus", "minus"}));
    vor->add_option("--steps", vo.steps, "RK4 steps for equivalence")->check(CLI::PositiveNumber);
    auto* radius_opt = vor->add_option("--fiber-radius", radius, "fiber box radius (searched when absent)")
                           ->check(CLI::PositiveNumber);

    std::string spec_out;
    auto* poi = app.add_subcommand("poissonize", "homogeneous Poisson structure on the extended chart");
    add_common(poi, poi_c, true);
    poi->add_option("--out", spec_out, "write the extended spec here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : fpk::kInputError;
    }

    try {
        if (*check) {
            const auto spec = fpk::load_spec(check_c.spec_path);
            return emit(fpk::run_check(spec, fpk::parse_suite(suite), run_options(check_c)), check_c);
        }
        if (*classify) {
            const auto spec = fpk::load_spec(classify_c.spec_path);
            const auto res = fpk::run_classify(spec, run_options(classify_c));
            if (classify_c.json_out != "-") std::cout << res.verdict << "\n";
            return emit(res.report, classify_c);
        }
        if (*vor) {
            const auto cmd = fpk::parse_vorobiev_command(vcmd);
            const auto spec = fpk::load_spec(vor_c.spec_path);
            vo.sign = sign == "minus" ? fpk::VorobievSign::Minus : fpk::VorobievSign::Plus;
            if (*radius_opt) vo.fiber_radius = radius;
            return emit(fpk::run_vorobiev(spec, cmd, vo, run_options(vor_c)), vor_c);
        }
        if (*poi) {
            const auto spec = fpk::load_spec(poi_c.spec_path);
            const auto res = fpk::run_poissonize(spec, run_options(poi_c));
            if (!spec_out.empty()) write_text(spec_out, res.spec_json);
            else if (poi_c.json_out != "-") std::cout << res.spec_json;
            const int rc = emit(res.report, poi_c);
            return rc;
        }
    } catch (const std::exception& e) {
        std::cerr << "fpk: " << e.what() << "\n";
        return fpk::exit_code_for(e);
    }
    return fpk::kInputError;
}
