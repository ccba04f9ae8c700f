#include "dadao/expm.hpp"

#include <array>
#include <cmath>

#include "dadao/error.hpp"

namespace dadao {

namespace {

using Matrix = Eigen::MatrixXd;

constexpr std::array<double, 4> kPade3 = {120.0, 60.0, 12.0, 1.0};
constexpr std::array<double, 6> kPade5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
constexpr std::array<double, 8> kPade7 = {17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0};
constexpr std::array<double, 10> kPade9 = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                                           2162160.0,     110880.0,     3960.0,       90.0,        1.0};
constexpr std::array<double, 14> kPade13 = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                            1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                            670442572800.0,      33522128640.0,       1323241920.0,
                                            40840800.0,          960960.0,            16380.0,
                                            182.0,               1.0};

// U holds the odd part, V the even part; exp(A) ~ (V - U)^{-1} (V + U).
template <std::size_t N>
void pade_low(const Matrix& a, const std::array<double, N>& b, Matrix& u, Matrix& v) {
  const Matrix id = Matrix::Identity(a.rows(), a.cols());
  const Matrix a2 = a * a;
  Matrix power = id;
  Matrix odd = Matrix::Zero(a.rows(), a.cols());
  v = Matrix::Zero(a.rows(), a.cols());
  for (std::size_t k = 0; k + 1 < N; k += 2) {
    v += b[k] * power;
    odd += b[k + 1] * power;
    power = power * a2;
  }
  u = a * odd;
}

void pade13(const Matrix& a, Matrix& u, Matrix& v) {
  const auto& b = kPade13;
  const Matrix id = Matrix::Identity(a.rows(), a.cols());
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  const Matrix inner_u = b[13] * a6 + b[11] * a4 + b[9] * a2;
  u = a * (a6 * inner_u + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
  const Matrix inner_v = b[12] * a6 + b[10] * a4 + b[8] * a2;
  v = a6 * inner_v + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
}

}  // namespace

Eigen::MatrixXd expm(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw ParameterError("expm: matrix must be square");
  if (!a.allFinite()) throw NumericError("expm: non-finite input");
  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  Matrix u, v;
  int squarings = 0;
  if (norm <= 1.495585217958292e-2) {
    pade_low(a, kPade3, u, v);
  } else if (norm <= 2.539398330063230e-1) {
    pade_low(a, kPade5, u, v);
  } else if (norm <= 9.504178996162932e-1) {
    pade_low(a, kPade7, u, v);
  } else if (norm <= 2.097847961257068) {
    pade_low(a, kPade9, u, v);
  } else {
    constexpr double kTheta13 = 5.371920351148152;
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / kTheta13))));
    pade13(a * std::ldexp(1.0, -squarings), u, v);
  }
  Matrix result = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) result = result * result;
  return result;
}

}  // namespace dadao
