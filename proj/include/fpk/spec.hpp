#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fpk/foliation.hpp"
#include "fpk/jacobi.hpp"
#include "fpk/report.hpp"
#include "fpk/tensor.hpp"
#include "fpk/vorobiev.hpp"

namespace fpk {

// One entry of the "structures" list.  Exactly the member matching `kind` is set.
struct SpecStructure {
    std::string kind;  // bivector, vector_field, form, jacobi_pair, algebroid, splitting_shift, chart_map
    std::string name;
    std::optional<MultivectorField> multivector;
    std::optional<DifferentialForm> form;
    std::optional<JacobiPair> pair;
    std::optional<AlgebroidData> algebroid;
    std::optional<SplittingShift> shift;
    std::optional<ChartMap> map;
    std::optional<MultivectorField> expected;  // chart_map: the pushed bivector on the target chart
};

struct StructureSpec {
    ChartPtr chart;
    std::optional<FoliatedChart> foliation;  // from leaf_coords
    std::optional<NormalBundle> normal;      // from the normal_bundle block
    std::vector<SpecStructure> structures;
    std::string digest;  // FNV-1a of the source text

    const SpecStructure* first(const std::string& kind) const;
    std::vector<const SpecStructure*> all(const std::string& kind) const;
};

// Throws SpecError with line/column (JSON) or expression position.
StructureSpec parse_spec(const std::string& text);
StructureSpec load_spec(const std::string& path);

// A chart plus bivectors, in the same format (used by poissonize).
std::string bivector_spec_json(const ChartPtr& chart, const std::vector<std::pair<std::string, MultivectorField>>& ps,
                               const std::vector<std::string>& leaf_coords = {});

enum class Suite { Poisson, Jacobi, Coupling, Tables, All };
Suite parse_suite(const std::string& s);  // throws SpecError

struct RunOptions {
    SampleProtocol protocol{default_sample_count(), 0};
    double tol = 1e-9;
};

// Exit-code contract shared by every command.
enum ExitCode { kPass = 0, kCheckFail = 1, kInputError = 2, kDegenerate = 3 };
int exit_code(const Report& r);
// Maps a caught library exception to 2 (input) or 3 (degenerate geometry); 1 otherwise.
int exit_code_for(const std::exception& e);

Report run_check(const StructureSpec& spec, Suite suite, const RunOptions& opt);

struct ClassifyResult {
    std::string verdict;  // "coupling", "leaf_tangent", ..., or "jacobi coupling kind N"
    Report report;
};
ClassifyResult run_classify(const StructureSpec& spec, const RunOptions& opt);

struct VorobievOptions {
    double t = 1.0;
    VorobievSign sign = VorobievSign::Plus;
    int steps = 200;
    std::optional<double> fiber_radius;
};
enum class VorobievCommand { Build, Coisotropy, Equivalence, Linearize };
VorobievCommand parse_vorobiev_command(const std::string& s);  // throws SpecError
Report run_vorobiev(const StructureSpec& spec, VorobievCommand cmd, const VorobievOptions& vo, const RunOptions& opt);

struct PoissonizeResult {
    std::string spec_json;  // the extended chart and P
    Report report;
};
PoissonizeResult run_poissonize(const StructureSpec& spec, const RunOptions& opt);

}  // namespace fpk
