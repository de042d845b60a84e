#include "oracles.hpp"

#include "msdi/reference.hpp"

#include <doctest.h>

using namespace msdi;

TEST_SUITE("reference") {

TEST_CASE("parallel skinning and binding equal the serial versions bit for bit") {
  const BodyModel body = make_desk_body();
  oracle::Rng rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    const Frame f = oracle::random_motion(rng, 2, body.num_pose_joints(), 1.0, 0.5).frames[0];
    const std::vector<Transform34> g = forward_kinematics(body, f).skinning;
    const Eigen::Matrix3Xd posed = lbs_skin(body, g);
    CHECK(posed == reference::lbs_skin(body, g));

    Eigen::Matrix3Xd pts = face_centroids(body);
    for (int i = 0; i < pts.cols(); ++i) pts.col(i) += oracle::uniform3(rng, -0.02, 0.02);
    const BarycentricBinding a = bind_points(pts, body.template_points(), body.faces());
    const BarycentricBinding b = reference::bind_points(pts, body.template_points(), body.faces());
    CHECK(a.face == b.face);
    CHECK(a.barycentric == b.barycentric);
    CHECK(a.normal_offset == b.normal_offset);

    const DeformedPoints da = deform_points_with_normals(a, posed, body.faces());
    const DeformedPoints db = reference::deform_points_with_normals(a, posed, body.faces());
    CHECK(da.points == db.points);
    CHECK(da.normals == db.normals);
  }
}

}  // TEST_SUITE
