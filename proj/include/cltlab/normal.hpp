#pragma once

namespace cltlab {

// Standard normal cdf Phi(x) = erfc(-x/sqrt(2))/2; absolute error below
// 1e-14 on the whole line (libm erfc).
double normal_cdf(double x);

double normal_pdf(double x);

}  // namespace cltlab
