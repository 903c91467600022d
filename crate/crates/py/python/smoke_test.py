"""Smoke test for the pyorbfront extension module."""

import os
import tempfile

import pyorbfront as orb


def main():
    left, right = orb.stereo_pair(320, 240, 12, 7)
    assert (left.width, left.height) == (320, 240)

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "left.pgm")
        orb.save_pgm(left, path)
        assert orb.load_pgm(path) == left
    assert orb.GrayImage.from_pgm(left.to_pgm()) == left

    levels = orb.build_pyramid(orb.GrayImage.filled(1280, 720, 0))
    assert [(l.width, l.height) for l in levels] == [(1280, 720), (1067, 600)]

    el = orb.extract(left)
    er = orb.extract(right, arith_mode="fixed8")
    assert len(el) > 0 and len(er) > 0
    f = el.features[0]
    assert len(f.descriptor) == 32 and 0 <= f.theta_q < 256
    assert orb.hamming(f.descriptor, f.descriptor) == 0
    assert orb.hamming(bytes(32), b"\xff" * 32) == 256
    assert len(el.dump()) == 48 * len(el)

    pairs = orb.match_stereo(el, er, fx=500.0, baseline=0.1)
    close = sum(abs(p.disparity - 12.0) <= 0.5 for p in pairs)
    assert close >= 0.95 * len(pairs), (close, len(pairs))
    assert orb.effective_depths(pairs) == len(pairs)

    fps = orb.pipeline_throughput(7.28, 14.59)
    assert 68.0 <= fps <= 69.0, fps
    assert len(orb.pipeline_simulate(7.28, 14.59, frames=10, chains=2)) == 60

    clean = orb.generate_stream(1.0, 0, 3)
    noisy = orb.generate_stream(1.0, 16_000_000, 3)
    assert orb.assemble_bundles(clean) == orb.assemble_bundles(noisy)
    assert orb.naive_misassociations(clean) == 0
    assert orb.naive_misassociations(noisy) > 0

    try:
        orb.generate_stream(1.0, 0, 0, cam_rate=30, imu_rate=100)
    except ValueError:
        pass
    else:
        raise AssertionError("non-integer rate ratio accepted")

    print(f"ok: {len(el)} features, {len(pairs)} pairs, {fps:.2f} fps")


if __name__ == "__main__":
    main()
