#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fpk {

// Root of every library exception; `kind()` gives a stable tag for reports.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& msg)
        : std::runtime_error(msg), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class SyntaxError : public Error {
public:
    SyntaxError(std::size_t pos, std::vector<std::string> expected, const std::string& msg)
        : Error("SyntaxError", msg), pos_(pos), expected_(std::move(expected)) {}
    std::size_t position() const noexcept { return pos_; }
    const std::vector<std::string>& expected() const noexcept { return expected_; }

private:
    std::size_t pos_;
    std::vector<std::string> expected_;
};

#define FPK_SIMPLE_ERROR(Name)                                              \
    class Name : public Error {                                             \
    public:                                                                 \
        explicit Name(const std::string& msg) : Error(#Name, msg) {}        \
    };

FPK_SIMPLE_ERROR(UnknownSymbol)
FPK_SIMPLE_ERROR(DomainError)
FPK_SIMPLE_ERROR(ChartMismatch)
FPK_SIMPLE_ERROR(DegreeError)
FPK_SIMPLE_ERROR(DegreeOverflow)
FPK_SIMPLE_ERROR(SingularJacobian)
FPK_SIMPLE_ERROR(RankDrop)
FPK_SIMPLE_ERROR(BadComplement)
FPK_SIMPLE_ERROR(NonUniform)
FPK_SIMPLE_ERROR(NotLeafTangent)
FPK_SIMPLE_ERROR(NotCoupling)
FPK_SIMPLE_ERROR(Degenerate)
FPK_SIMPLE_ERROR(DegenerateSigma)
FPK_SIMPLE_ERROR(IntegrationLeftDomain)
FPK_SIMPLE_ERROR(NotALeaf)
FPK_SIMPLE_ERROR(NonPositiveScale)
FPK_SIMPLE_ERROR(KindMismatch)
FPK_SIMPLE_ERROR(NotLCS)
FPK_SIMPLE_ERROR(NotContact)
FPK_SIMPLE_ERROR(NotJacobi)
FPK_SIMPLE_ERROR(ZetaNotAnnihilating)
FPK_SIMPLE_ERROR(SpecError)

#undef FPK_SIMPLE_ERROR

}  // namespace fpk
