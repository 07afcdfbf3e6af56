#pragma once

#include "bwr/binary_io.hpp"
#include "bwr/bvh.hpp"
#include "bwr/coding.hpp"
#include "bwr/error.hpp"
#include "bwr/hierarchy.hpp"
#include "bwr/hierarchy_io.hpp"
#include "bwr/mesh.hpp"
#include "bwr/mesh_io.hpp"
#include "bwr/metrics.hpp"
#include "bwr/parallel.hpp"
#include "bwr/piercing.hpp"
#include "bwr/rd.hpp"
#include "bwr/shapes.hpp"
#include "bwr/subdivision.hpp"
#include "bwr/vec3.hpp"
