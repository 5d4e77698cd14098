#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace brickplan {

// Error taxonomy shared by the library and the CLI. The CLI maps these onto
// exit codes: ValidationError -> 3, everything else -> 1 (usage errors are
// handled by the argument parser and exit 2).
class Error : public std::runtime_error {
  public:
    Error(std::string type, const std::string& message)
        : std::runtime_error(message), type_(std::move(type)) {}

    const std::string& type() const { return type_; }

  private:
    std::string type_;
};

// Malformed input files (JSON syntax, missing fields, bad field types).
class ParseError : public Error {
  public:
    explicit ParseError(const std::string& message) : Error("parse", message) {}
};

// Structurally valid input that violates a documented constraint.
class ValidationError : public Error {
  public:
    explicit ValidationError(const std::string& message) : Error("validation", message) {}
};

// Placement rejections, reported with the reason so generators can retry.
class PlacementError : public Error {
  public:
    enum class Reason { Collision, Floating, OutOfBounds };

    PlacementError(Reason reason, const std::string& message)
        : Error("placement", message), reason_(reason) {}

    Reason reason() const { return reason_; }

  private:
    Reason reason_;
};

// Evaluation inputs whose component multisets do not line up.
class CountMismatch : public Error {
  public:
    explicit CountMismatch(const std::string& message) : Error("count_mismatch", message) {}
};

// Shape-distance evaluation on an empty shape (only one side empty).
class EmptyShape : public Error {
  public:
    explicit EmptyShape(const std::string& message) : Error("empty_shape", message) {}
};

// Rejection sampling ran out of attempts; carries the offending seed.
class GenerationExhausted : public Error {
  public:
    GenerationExhausted(std::uint64_t seed, const std::string& message)
        : Error("generation_exhausted", message), seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

  private:
    std::uint64_t seed_;
};

}  // namespace brickplan
