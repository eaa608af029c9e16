#pragma once

#include "widebnn/numkit/dense_matrix.hpp"
#include "widebnn/numkit/gaussian_stream.hpp"
#include "widebnn/numkit/linalg.hpp"
