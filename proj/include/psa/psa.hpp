#pragma once

#include "psa/core.hpp"
#include "psa/spectral.hpp"
#include "psa/bath.hpp"
#include "psa/generator.hpp"
#include "psa/positivity.hpp"
#include "psa/dynamics.hpp"
#include "psa/dipole.hpp"
