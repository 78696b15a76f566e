#pragma once

#include <stdexcept>
#include <string>

namespace coalsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define COALSIM_DEFINE_ERROR(Name)     \
  class Name : public Error {          \
   public:                             \
    using Error::Error;                \
  }

// measures
COALSIM_DEFINE_ERROR(SimplexViolation);
COALSIM_DEFINE_ERROR(MassViolation);
COALSIM_DEFINE_ERROR(BadParameter);
COALSIM_DEFINE_ERROR(BarUnsupported);
COALSIM_DEFINE_ERROR(QuadratureFailure);
COALSIM_DEFINE_ERROR(RateOverflow);
// speed
COALSIM_DEFINE_ERROR(HorizonExceeded);
// simulator
COALSIM_DEFINE_ERROR(GammaZeroWithTauStar);
COALSIM_DEFINE_ERROR(UnsupportedMeasure);
COALSIM_DEFINE_ERROR(NonTermination);
COALSIM_DEFINE_ERROR(UnknownLineage);
COALSIM_DEFINE_ERROR(InactiveLineage);
COALSIM_DEFINE_ERROR(NonmonotoneTime);
// ewens / statistics
COALSIM_DEFINE_ERROR(BadConfiguration);
COALSIM_DEFINE_ERROR(BadGamma);
COALSIM_DEFINE_ERROR(TooLarge);
COALSIM_DEFINE_ERROR(BadBeta);
// experiments
COALSIM_DEFINE_ERROR(ZeroReplicates);
COALSIM_DEFINE_ERROR(CDIRequired);
// cli
COALSIM_DEFINE_ERROR(ConfigError);

#undef COALSIM_DEFINE_ERROR

}  // namespace coalsim
