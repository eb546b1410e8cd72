#include "eafpca/kernel.hpp"

namespace eafpca {

std::string to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::Epanechnikov: return "epanechnikov";
    case KernelFamily::Uniform: return "uniform";
    case KernelFamily::Gaussian: return "gaussian";
  }
  return "?";
}

KernelFamily parse_kernel_family(const std::string& s) {
  if (s == "epanechnikov") return KernelFamily::Epanechnikov;
  if (s == "uniform") return KernelFamily::Uniform;
  if (s == "gaussian") return KernelFamily::Gaussian;
  throw Error("kernel.parse", "unknown kernel family '" + s + "'");
}

}  // namespace eafpca
