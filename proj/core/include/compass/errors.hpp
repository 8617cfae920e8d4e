#pragma once

#include <stdexcept>
#include <string>

namespace compass {

/// Base for all typed errors. `code()` is a stable machine-readable name
/// (e.g. "DuplicateId"); `subject()` is the offending entity when there is
/// one (a node id, unit symbol, record id...).
class Error : public std::runtime_error {
public:
    Error(std::string code, std::string subject, const std::string& message)
        : std::runtime_error(format(code, subject, message)),
          code_(std::move(code)),
          subject_(std::move(subject)) {}

    const std::string& code() const noexcept { return code_; }
    const std::string& subject() const noexcept { return subject_; }

private:
    static std::string format(const std::string& code, const std::string& subject,
                              const std::string& message) {
        std::string out = code;
        if (!subject.empty()) {
            out += " [";
            out += subject;
            out += "]";
        }
        out += ": ";
        out += message;
        return out;
    }

    std::string code_;
    std::string subject_;
};

} // namespace compass
