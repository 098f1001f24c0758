"""Smoke test for the pydepthtube extension.

Build and install first:
    pip install --no-build-isolation ./crates/python
then run:
    python python/smoke_test.py
"""

import struct
import sys

import pydepthtube as dt


def check(cond, what):
    if not cond:
        print(f"FAIL {what}")
        sys.exit(1)
    print(f"ok   {what}")


def main():
    ds = dt.Dataset.synthetic(60, 12, 7)
    check(len(ds) == 60 and ds.total_vertices == 720, "synthetic bundle size")
    check(dt.Dataset.parse(ds.to_text()).total_vertices == 720, "text round trip")

    cam = dt.Camera.framing(ds, 96, 72)
    check(cam.viewport == (96, 72), "camera viewport")
    p = [0.1, 0.2, 0.3]
    check(abs(cam.roll(0.7).depth(p) - cam.depth(p)) < 1e-12, "roll keeps depth")

    check(dt.linear_map(0, 9, 0.2, 0.8) == 0.2 and dt.linear_map(9, 9, 0.2, 0.8) == 0.8, "linear map endpoints")
    depths = [3.0, 1.0, 2.0, 1.0, 0.5]
    check(dt.depth_ranks(depths, 3) == [4, 1, 3, 2, 0], "distributed ranks")
    check(dt.tube_counts([[0, 0, 0], [1, 0, 0], [1, 1, 0]], 0.1, 8) == (24, 32), "tube counts")

    try:
        dt.MappingSpec(radius=[0.5, 0.1])
        check(False, "bad radius rejected")
    except ValueError:
        check(True, "bad radius rejected")

    spec = dt.MappingSpec(map="size,color", radius=[0.003, 0.012])
    images = {}
    for workers in (1, 3):
        engine = dt.Engine(ds, cam, spec, workers=workers)
        stats = engine.render_frame()
        check(stats["sort_rounds"] == 2 and stats["workers"] == workers, f"two rounds at P={workers}")
        images[workers] = engine.rgb()
    check(images[1] == images[3], "P=3 image matches P=1")
    check(any(b != 0 for b in images[1]), "something was drawn")

    engine.set_mapping(dt.MappingSpec(map="color"))
    stats = engine.handle_interaction(0.1, 0.0)
    check(stats["sort_rounds"] == 1 and stats["frame_id"] == 2, "color only uses one round")

    ppm = engine.ppm()
    check(ppm.startswith(b"P6\n96 72\n255\n") and len(ppm) == 13 + 96 * 72 * 3, "ppm bytes")
    dump = engine.depth_dump()
    check(dump[:4] == b"DPTH" and struct.unpack("<II", dump[4:12]) == (96, 72), "depth dump header")
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
