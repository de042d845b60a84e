#pragma once

// Serial versions of the OpenMP kernels. They share the per-item code with
// the parallel drivers and must produce bit-identical output; tests and the
// benchmark compare against them.

#include "msdi/motion_model.hpp"
#include "msdi/render.hpp"

namespace msdi::reference {

Eigen::Matrix3Xd lbs_skin(const BodyModel& body, const std::vector<Transform34>& transforms);

BarycentricBinding bind_points(const Eigen::Matrix3Xd& points, const Eigen::Matrix3Xd& vertices,
                               const Eigen::Matrix3Xi& faces);

DeformedPoints deform_points_with_normals(const BarycentricBinding& binding, const Eigen::Matrix3Xd& posed_vertices,
                                          const Eigen::Matrix3Xi& faces);

/// Splat by splat over a transmittance buffer.
Image render_frame(const GaussianCloud& cloud, const Camera& camera);

}  // namespace msdi::reference
