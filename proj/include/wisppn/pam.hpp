#pragma once

#include <array>

#include "wisppn/pose.hpp"
#include "wisppn/tensor.hpp"

namespace wisppn {

// Row-major 18x18 matrix of doubles.
struct Mat18 {
    std::array<double, kNumKeypoints * kNumKeypoints> m{};

    double& at(int i, int j) { return m[static_cast<std::size_t>(i) * kNumKeypoints + j]; }
    double at(int i, int j) const { return m[static_cast<std::size_t>(i) * kNumKeypoints + j]; }
};

// Ground-truth pose-adjacency matrix. Diagonals hold coordinates and
// confidences; entry (i, j) holds the i->j displacement (confidence product
// in the c plane).
struct Pam {
    Mat18 x, y, c;
};

// Predicted pose-adjacency matrix: x and y planes only, off-diagonals
// unconstrained.
struct PPam {
    Mat18 x, y;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

Pam encode_pam(const Keypoints& kp);

// Keypoint coordinates are the diagonals; off-diagonals are ignored.
std::array<Point, kNumKeypoints> decode_ppam(const PPam& p);

// Mean absolute violation of off[i][j] = diag[i] - diag[j] over both planes;
// zero exactly when the prediction is a consistent displacement field.
double consistency_residual(const PPam& p);

// Tensor bridges for the training loss. Plane 0 is x, plane 1 is y.
Tensor pam_target_tensor(const Pam& p);            // [2, 18, 18]
Tensor pam_weight_tensor(const Pam& p);            // [2, 18, 18], c tiled over both planes
PPam ppam_from_tensor(const Tensor& t);            // accepts [2,18,18] or [1,2,18,18]

}  // namespace wisppn
