#pragma once

#include "whdg/mesh.hpp"
#include "whdg/polyspace.hpp"
#include "whdg/quadrature.hpp"
#include "whdg/problem.hpp"
#include "whdg/local.hpp"
#include "whdg/hdg.hpp"
#include "whdg/sgfv.hpp"
#include "whdg/postproc.hpp"
#include "whdg/harness.hpp"
#include "whdg/pin.hpp"
