#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "sfm/errors.hpp"

namespace sfm {

/// Pinhole camera with an 8-parameter state: unit quaternion (w,x,y,z) for the
/// rotation, translation, and the natural log of a single shared focal length.
/// The principal point is data, not a parameter; it is set from the image size
/// and never optimized.
///
/// Convention: world-to-camera, x_cam = R x + t. The camera center is -R^T t.
template <typename Scalar>
class Camera {
  public:
    using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
    using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
    using Vec4 = Eigen::Matrix<Scalar, 4, 1>;
    using Vec8 = Eigen::Matrix<Scalar, 8, 1>;
    using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
    using Mat34 = Eigen::Matrix<Scalar, 3, 4>;

    /// Identity pose, f = 1, principal point at the origin.
    Camera() : q_(1, 0, 0, 0), t_(Vec3::Zero()), log_f_(0), pp_(Vec2::Zero()) {}

    Camera(const Vec4& q_wxyz, const Vec3& t, Scalar log_f, const Vec2& pp)
        : q_(q_wxyz), t_(t), log_f_(log_f), pp_(pp) {
        renormalize();
    }

    static Camera from_rotation(const Mat3& R, const Vec3& t, Scalar log_f, const Vec2& pp) {
        Eigen::Quaternion<Scalar> eq(R);
        return Camera(Vec4(eq.w(), eq.x(), eq.y(), eq.z()), t, log_f, pp);
    }

    /// Principal point at the image center (w/2, h/2).
    static Vec2 center_principal_point(int width, int height) {
        return Vec2(Scalar(width) / Scalar(2), Scalar(height) / Scalar(2));
    }

    const Vec4& q() const { return q_; }
    const Vec3& t() const { return t_; }
    Scalar log_f() const { return log_f_; }
    Scalar focal() const { return std::exp(log_f_); }
    const Vec2& pp() const { return pp_; }

    void set_q(const Vec4& q_wxyz) {
        q_ = q_wxyz;
        renormalize();
    }
    void set_t(const Vec3& t) { t_ = t; }
    void set_log_f(Scalar log_f) { log_f_ = log_f; }

    Mat3 rotation() const {
        const Scalar w = q_[0], x = q_[1], y = q_[2], z = q_[3];
        Mat3 R;
        R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
             2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
             2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
        return R;
    }

    Vec3 center() const { return -(rotation().transpose() * t_); }

    Mat3 intrinsics() const {
        const Scalar f = focal();
        Mat3 K;
        K << f, 0, pp_[0],
             0, f, pp_[1],
             0, 0, 1;
        return K;
    }

    /// 3x4 projection matrix K [R | t].
    Mat34 projection_matrix() const {
        Mat34 P;
        P.template leftCols<3>() = rotation();
        P.col(3) = t_;
        return intrinsics() * P;
    }

    /// Optimizable state as a flat vector: q(4), t(3), log_f.
    Vec8 params() const {
        Vec8 p;
        p << q_, t_, log_f_;
        return p;
    }

    Camera with_params(const Vec8& p) const {
        return Camera(p.template head<4>(), p.template segment<3>(4), p[7], pp_);
    }

  private:
    // Unit norm plus a canonical sign so that q and -q (which rotate
    // identically) serialize and compare identically.
    void renormalize() {
        if (!(q_.squaredNorm() > Scalar(0))) {
            throw ContractError("Camera: zero quaternion");
        }
        q_.normalize();
        for (int i = 0; i < 4; ++i) {
            if (q_[i] > Scalar(0)) break;
            if (q_[i] < Scalar(0)) {
                q_ = -q_;
                break;
            }
        }
    }

    Vec4 q_;
    Vec3 t_;
    Scalar log_f_;
    Vec2 pp_;
};

using Camerad = Camera<double>;
using Cameraf = Camera<float>;

template <typename Scalar>
struct Projection {
    Eigen::Matrix<Scalar, 2, 1> y;
    Scalar depth;  // third camera-frame coordinate; sign carries cheirality
};

/// Projects without throwing. Returns false when the point lies on the
/// principal plane (|depth| < 1e-12) and no finite pixel exists.
template <typename Scalar, typename Derived>
bool try_project(const Camera<Scalar>& camera, const Eigen::MatrixBase<Derived>& x,
                 Projection<Scalar>& out) {
    const Eigen::Matrix<Scalar, 3, 1> c = camera.rotation() * x + camera.t();
    out.depth = c[2];
    if (std::abs(c[2]) < Scalar(1e-12)) return false;
    const Scalar f = camera.focal();
    out.y = f * c.template head<2>() / c[2] + camera.pp();
    return true;
}

template <typename Scalar, typename Derived>
Projection<Scalar> project(const Camera<Scalar>& camera, const Eigen::MatrixBase<Derived>& x) {
    Projection<Scalar> p;
    if (!try_project(camera, x, p)) {
        throw PrincipalPlaneError("project: point on principal plane (depth ~ 0)");
    }
    return p;
}

/// Analytic Jacobian of the projected pixel with respect to
/// [q(4), t(3), log_f(1), x(3)], a 2x11 matrix.
///
/// The quaternion block is the derivative through renormalization: the raw
/// derivative of the quadratic rotation formula multiplied by the tangent
/// projector (I - q q^T). It therefore matches finite differences that
/// perturb q and renormalize. The principal point is excluded by contract.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, 2, 11> project_jacobian(const Camera<Scalar>& camera,
                                              const Eigen::MatrixBase<Derived>& x) {
    using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
    using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

    const Mat3 R = camera.rotation();
    const Vec3 xv = x;
    const Vec3 c = R * xv + camera.t();
    if (std::abs(c[2]) < Scalar(1e-12)) {
        throw PrincipalPlaneError("project_jacobian: point on principal plane");
    }
    const Scalar f = camera.focal();
    const Scalar iz = Scalar(1) / c[2];

    // d(pixel)/d(camera-frame point)
    Eigen::Matrix<Scalar, 2, 3> dy_dc;
    dy_dc << f * iz, 0, -f * c[0] * iz * iz,
             0, f * iz, -f * c[1] * iz * iz;

    // d(R x)/dq for the quadratic form R(q) x = x + 2w(u cross x) + 2u cross (u cross x).
    const auto& q = camera.q();
    const Scalar w = q[0];
    const Vec3 u = q.template tail<3>();
    Mat3 x_hat;
    x_hat << 0, -xv[2], xv[1],
             xv[2], 0, -xv[0],
             -xv[1], xv[0], 0;
    Eigen::Matrix<Scalar, 3, 4> dc_dq;
    dc_dq.col(0) = Scalar(2) * u.cross(xv);
    dc_dq.template rightCols<3>() =
        Scalar(2) * (u.dot(xv) * Mat3::Identity() + u * xv.transpose() -
                     Scalar(2) * xv * u.transpose() - w * x_hat);
    // Lift onto the tangent of the unit sphere.
    const Eigen::Matrix<Scalar, 4, 4> tangent =
        Eigen::Matrix<Scalar, 4, 4>::Identity() - q * q.transpose();

    Eigen::Matrix<Scalar, 2, 11> J;
    J.template block<2, 4>(0, 0) = dy_dc * dc_dq * tangent;
    J.template block<2, 3>(0, 4) = dy_dc;
    J.col(7) = f * c.template head<2>() * iz;  // d/d(log f) = f * d/df
    J.template block<2, 3>(0, 8) = dy_dc * R;
    return J;
}

template <typename Scalar>
struct RelativePose {
    Eigen::Matrix<Scalar, 3, 3> rotation;      // R_b R_a^T
    Eigen::Matrix<Scalar, 3, 1> translation;   // unit direction, zero when degenerate
    bool degenerate_baseline = false;
};

/// Relative transform mapping camera-a coordinates into camera b's frame.
/// The translation is returned as a unit direction; a baseline shorter than
/// 1e-12 is flagged degenerate instead of being normalized.
template <typename Scalar>
RelativePose<Scalar> relative_pose(const Camera<Scalar>& a, const Camera<Scalar>& b) {
    RelativePose<Scalar> rel;
    rel.rotation = b.rotation() * a.rotation().transpose();
    const Eigen::Matrix<Scalar, 3, 1> baseline = b.t() - rel.rotation * a.t();
    const Scalar n = baseline.norm();
    if (n < Scalar(1e-12)) {
        rel.translation.setZero();
        rel.degenerate_baseline = true;
    } else {
        rel.translation = baseline / n;
    }
    return rel;
}

/// Rotation angle of R in degrees. Uses the quaternion atan2 form, which
/// keeps full precision near zero where the acos-of-trace form does not.
template <typename Scalar>
Scalar rotation_angle_deg(const Eigen::Matrix<Scalar, 3, 3>& R) {
    const Eigen::Quaternion<Scalar> eq(R);
    return Scalar(2) * std::atan2(eq.vec().norm(), std::abs(eq.w())) * Scalar(180) /
           Scalar(EIGEN_PI);
}

/// Angle between two direction vectors in degrees (atan2 form, stable near 0 and 180).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar angle_between_deg(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
    using Scalar = typename DerivedA::Scalar;
    const Eigen::Matrix<Scalar, 3, 1> av = a, bv = b;
    return std::atan2(av.cross(bv).norm(), av.dot(bv)) * Scalar(180) / Scalar(EIGEN_PI);
}

}  // namespace sfm
