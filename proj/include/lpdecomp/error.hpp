#pragma once

#include <stdexcept>
#include <string>

namespace lpdecomp {

// Exit-code classes used by the command line front end.
enum class ErrorClass { Input = 1, Model = 2, Oracle = 3 };

class Error : public std::runtime_error {
public:
    Error(std::string category, ErrorClass cls, const std::string& what)
        : std::runtime_error(what), category_(std::move(category)), class_(cls) {}

    const std::string& category() const noexcept { return category_; }
    ErrorClass error_class() const noexcept { return class_; }

private:
    std::string category_;
    ErrorClass class_;
};

#define LPDECOMP_DEFINE_ERROR(Name, Cls)                                       \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& what) : Error(#Name, Cls, what) {}    \
    }

LPDECOMP_DEFINE_ERROR(SyntaxError, ErrorClass::Input);
LPDECOMP_DEFINE_ERROR(UnsafeRuleError, ErrorClass::Input);
LPDECOMP_DEFINE_ERROR(EmptyHypergraphError, ErrorClass::Input);
LPDECOMP_DEFINE_ERROR(HeadNotCoveredError, ErrorClass::Input);
LPDECOMP_DEFINE_ERROR(UnrepairableError, ErrorClass::Input);
LPDECOMP_DEFINE_ERROR(NoIdbError, ErrorClass::Input);
LPDECOMP_DEFINE_ERROR(UnstratifiedError, ErrorClass::Input);
LPDECOMP_DEFINE_ERROR(ArithmeticError, ErrorClass::Input);
LPDECOMP_DEFINE_ERROR(DimensionMismatch, ErrorClass::Input);
LPDECOMP_DEFINE_ERROR(DegenerateDatasetError, ErrorClass::Input);
LPDECOMP_DEFINE_ERROR(DatasetFormatError, ErrorClass::Input);
LPDECOMP_DEFINE_ERROR(IoError, ErrorClass::Input);
LPDECOMP_DEFINE_ERROR(UsageError, ErrorClass::Input);
LPDECOMP_DEFINE_ERROR(VersionMismatch, ErrorClass::Model);
LPDECOMP_DEFINE_ERROR(ChecksumMismatch, ErrorClass::Model);
LPDECOMP_DEFINE_ERROR(ModelFormatError, ErrorClass::Model);
LPDECOMP_DEFINE_ERROR(TimeoutError, ErrorClass::Oracle);
LPDECOMP_DEFINE_ERROR(OracleError, ErrorClass::Oracle);

#undef LPDECOMP_DEFINE_ERROR

} // namespace lpdecomp
