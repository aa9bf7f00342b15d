#pragma once

#include "spinlab/averaging.hpp"
#include "spinlab/config.hpp"
#include "spinlab/convergence.hpp"
#include "spinlab/demag.hpp"
#include "spinlab/energies.hpp"
#include "spinlab/error.hpp"
#include "spinlab/fem_projection.hpp"
#include "spinlab/fields.hpp"
#include "spinlab/geometry.hpp"
#include "spinlab/runner.hpp"
#include "spinlab/spin_field.hpp"
#include "spinlab/vec3.hpp"
