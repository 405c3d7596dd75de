#pragma once

#include "cache.hpp"
#include "coarse.hpp"
#include "coefficient.hpp"
#include "config.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "fine_solver.hpp"
#include "mesh.hpp"
#include "mesh_io.hpp"
#include "snapshot.hpp"
#include "spectral.hpp"
#include "vtk.hpp"
