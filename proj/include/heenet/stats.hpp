#pragma once

namespace heenet {

// standard normal CDF
double normal_cdf(double x);

// inverse standard normal CDF, p in (0,1); accurate to ~1e-9
double normal_quantile(double p);

// two-sided normal p-value for a z statistic
double normal_two_sided_p(double z);

}  // namespace heenet
