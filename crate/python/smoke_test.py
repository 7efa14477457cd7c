"""Smoke test for the affine_stereo extension module.

Build and install first:
    pip install --no-build-isolation ./crates/python
Then run:
    python python/smoke_test.py
"""

import math

import affine_stereo as ac


def close(a, b, tol):
    return all(abs(x - y) <= tol for x, y in zip(a, b))


def main():
    assert "F2UDIR" in ac.ESTIMATORS and "forward" in ac.POSES

    scene = ac.Scene.simulate("general", seed=3)
    assert len(scene) == 144, len(scene)
    corners = scene.corners()
    assert {c["plane"] for c in corners} == {1, 2, 3}

    again = ac.Scene.from_json(scene.to_json())
    assert again.to_json() == scene.to_json()

    for est in ac.ESTIMATORS:
        rec = scene.reconstruct(est, det_hint="exact")
        assert len(rec) == len(scene), (est, len(rec))
        truth = {c["id"]: c["normal"] for c in corners}
        worst = max(ac.angular_error(n, truth[i]) for i, _, _, n in rec.points())
        assert worst < 1e-4, (est, worst)

    noisy = ac.Scene.simulate("standard_stereo", seed=5, sigma_deg=1.0)
    rec = noisy.reconstruct("2SDIR", metric=True)
    assert abs(rec.baseline - 300.0) / 300.0 < 0.05, rec.baseline
    for plane in rec.score(noisy):
        assert math.isfinite(plane["mean_err_deg"]), plane

    c = corners[0]
    cam1, cam2 = scene.cameras
    n = ac.estimate_normal(c["affine"], c["p1"], c["p2"], cam1, cam2, c["world"])
    assert ac.angular_error(n, c["normal"]) < 1e-6
    assert ac.epipolar_residual(c["affine"], scene.fundamental, c["p1"], c["p2"]) < 1e-10
    x = ac.triangulate(cam1, cam2, c["p1"], c["p2"])
    assert close(x, c["world"], 1e-6), (x, c["world"])

    p2, a = ac.affine_from_homography([[1.0, 0.1, 5.0], [0.0, 0.9, -3.0], [0.0, 0.0, 1.0]], (10.0, 20.0))
    assert close(p2, (17.0, 15.0), 1e-12) and close(a[0] + a[1], [1.0, 0.1, 0.0, 0.9], 1e-12)

    normal, _, rms = ac.fit_plane_pca([[0, 0, 5], [1, 0, 5], [0, 1, 5], [1, 1, 5]])
    assert close(normal, [0, 0, -1], 1e-12) and rms < 1e-12

    results, summary = ac.evaluate(["general"], ["2SDIR"], [0.0, 1.0], trials=3, seed=1)
    assert results.count("\n") == 1 + 2 * 3 * 3, results.count("\n")
    assert summary.startswith("schema_version")

    try:
        ac.Scene.simulate("sideways")
    except ac.AffineStereoError as e:
        assert "sideways" in str(e)
    else:
        raise AssertionError("bad pose accepted")

    print("smoke test passed:", scene, rec)


if __name__ == "__main__":
    main()
