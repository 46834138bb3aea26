#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>

namespace crbsde {

using Vec2 = std::array<double, 2>;
// Row-major 2x2 matrix.
using Mat2 = std::array<Vec2, 2>;

// Error categories; values double as CLI exit codes.
enum class ErrorCode : int {
  Validation = 2,  // bad problem data, failed assumption, parse error
  Guard = 3,       // combinatorial or step-size guard tripped
  Numerical = 4,   // iteration failed to converge, singular matrix, ...
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string tag, const std::string& what)
      : std::runtime_error(what), code_(code), tag_(std::move(tag)) {}
  ErrorCode code() const { return code_; }
  // Short machine-readable tag, e.g. "VALIDATION_TERMINAL".
  const std::string& tag() const { return tag_; }

 private:
  ErrorCode code_;
  std::string tag_;
};

// Pairwise summation with a fixed association order, so results do not
// depend on thread count or incidental loop restructuring.
double pairwise_sum(std::span<const double> v);

Mat2 mat_mul(const Mat2& a, const Mat2& b);
Vec2 mat_vec(const Mat2& m, const Vec2& v);
Mat2 mat_transpose(const Mat2& m);
// Throws Error(Numerical) if the matrix is singular or the condition
// number estimate exceeds cond_cap.
Mat2 mat_inverse(const Mat2& m, double cond_cap = 1e12);

// Runs fn(begin, end) over [0, n) split into chunks, one thread per chunk.
// All chunks must write disjoint locations; there is no reduction here.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t, std::size_t)>& fn);

int default_threads();
void set_default_threads(int threads);

}  // namespace crbsde
