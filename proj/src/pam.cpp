#include "wisppn/pam.hpp"

#include <cmath>

#include "wisppn/common.hpp"

namespace wisppn {

Pam encode_pam(const Keypoints& kp) {
    Pam p;
    for (int i = 0; i < kNumKeypoints; ++i) {
        for (int j = 0; j < kNumKeypoints; ++j) {
            if (i == j) {
                p.x.at(i, j) = kp[i].x;
                p.y.at(i, j) = kp[i].y;
                p.c.at(i, j) = kp[i].c;
            } else {
                p.x.at(i, j) = kp[i].x - kp[j].x;
                p.y.at(i, j) = kp[i].y - kp[j].y;
                p.c.at(i, j) = kp[i].c * kp[j].c;
            }
        }
    }
    return p;
}

std::array<Point, kNumKeypoints> decode_ppam(const PPam& p) {
    std::array<Point, kNumKeypoints> pts;
    for (int k = 0; k < kNumKeypoints; ++k) {
        pts[static_cast<std::size_t>(k)].x = p.x.at(k, k);
        pts[static_cast<std::size_t>(k)].y = p.y.at(k, k);
    }
    return pts;
}

double consistency_residual(const PPam& p) {
    double acc = 0.0;
    for (const Mat18* plane : {&p.x, &p.y}) {
        for (int i = 0; i < kNumKeypoints; ++i)
            for (int j = 0; j < kNumKeypoints; ++j) {
                if (i == j) continue;
                acc += std::abs(plane->at(i, j) - (plane->at(i, i) - plane->at(j, j)));
            }
    }
    return acc / (2.0 * kNumKeypoints * (kNumKeypoints - 1));
}

Tensor pam_target_tensor(const Pam& p) {
    Tensor t({2, kNumKeypoints, kNumKeypoints});
    double* d = t.data();
    for (std::size_t i = 0; i < p.x.m.size(); ++i) d[i] = p.x.m[i];
    for (std::size_t i = 0; i < p.y.m.size(); ++i) d[p.x.m.size() + i] = p.y.m[i];
    return t;
}

Tensor pam_weight_tensor(const Pam& p) {
    Tensor t({2, kNumKeypoints, kNumKeypoints});
    double* d = t.data();
    for (std::size_t i = 0; i < p.c.m.size(); ++i) {
        d[i] = p.c.m[i];
        d[p.c.m.size() + i] = p.c.m[i];
    }
    return t;
}

PPam ppam_from_tensor(const Tensor& t) {
    const std::size_t plane = static_cast<std::size_t>(kNumKeypoints) * kNumKeypoints;
    const bool ok = (t.rank() == 3 && t.dim(0) == 2 && t.dim(1) == kNumKeypoints &&
                     t.dim(2) == kNumKeypoints) ||
                    (t.rank() == 4 && t.dim(0) == 1 && t.dim(1) == 2 &&
                     t.dim(2) == kNumKeypoints && t.dim(3) == kNumKeypoints);
    if (!ok)
        throw DimensionError("expected a 2x18x18 prediction tensor, got " + t.shape_str());
    PPam p;
    const double* d = t.data();
    for (std::size_t i = 0; i < plane; ++i) {
        p.x.m[i] = d[i];
        p.y.m[i] = d[plane + i];
    }
    return p;
}

}  // namespace wisppn
