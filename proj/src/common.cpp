#include "crbsde/common.hpp"

#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

namespace crbsde {

namespace {
std::atomic<int> g_threads{1};
}

int default_threads() { return g_threads.load(); }
void set_default_threads(int threads) { g_threads.store(threads < 1 ? 1 : threads); }

double pairwise_sum(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(v.subspan(0, h)) + pairwise_sum(v.subspan(h));
}

Mat2 mat_mul(const Mat2& a, const Mat2& b) {
  Mat2 r{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
  return r;
}

Vec2 mat_vec(const Mat2& m, const Vec2& v) {
  return {m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]};
}

Mat2 mat_transpose(const Mat2& m) {
  return {Vec2{m[0][0], m[1][0]}, Vec2{m[0][1], m[1][1]}};
}

Mat2 mat_inverse(const Mat2& m, double cond_cap) {
  const double det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
  double norm = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) norm = std::max(norm, std::fabs(m[i][j]));
  if (det == 0.0 || norm * norm / std::fabs(det) > cond_cap) {
    throw Error(ErrorCode::Numerical, "NUMERICAL_SINGULAR",
                "2x2 matrix is singular or ill conditioned (det=" +
                    std::to_string(det) + ")");
  }
  const double id = 1.0 / det;
  return {Vec2{m[1][1] * id, -m[0][1] * id}, Vec2{-m[1][0] * id, m[0][0] * id}};
}

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  if (threads <= 1 || n < 1024) {
    fn(0, n);
    return;
  }
  const std::size_t k = static_cast<std::size_t>(threads);
  const std::size_t chunk = (n + k - 1) / k;
  std::vector<std::thread> pool;
  for (std::size_t b = 0; b < n; b += chunk) {
    const std::size_t e = std::min(n, b + chunk);
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace crbsde
