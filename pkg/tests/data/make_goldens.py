"""Regenerate committed golden byte files.

Run from the repo root:  python tests/data/make_goldens.py

The record golden comes from the scalar-by-scalar oracle serializer in
test_wirerec (not the production encoder); the vector-stream goldens come
from the point-at-a-time oracle encoder in test_scribe.
"""

import sys
from pathlib import Path

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE.parent))


def main():
    import test_wirerec
    (HERE / "golden_record.bin").write_bytes(
        test_wirerec.oracle_encode(test_wirerec.golden_fixture()))
    print("wrote golden_record.bin")

    import test_scribe
    for name, view in test_scribe.fixture_views().items():
        data = test_scribe.oracle_render(view)
        (HERE / f"golden_tek_{name}.bin").write_bytes(data)
        print(f"wrote golden_tek_{name}.bin ({len(data)} bytes)")

    import numpy as np
    from neurorelay import scribe
    from neurorelay.oversight.view import WaterfallView
    pulse = np.zeros((1, 64), dtype=np.float32)
    pulse[0, 16:48] = 1.0
    frame = scribe.render_raster(
        WaterfallView(traces=(test_scribe.make_trace(pulse),)), label="pulse")
    (HERE / "golden_frame.bin").write_bytes(frame.to_bytes())
    print(f"wrote golden_frame.bin ({frame.frame_size} bytes)")


if __name__ == "__main__":
    main()
