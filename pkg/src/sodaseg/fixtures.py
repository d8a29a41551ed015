"""Small hand-built instances used by the demo command and the test suite.

``worked_example`` has three ground-truth segments and four proposals with
integer endpoints chosen so the interesting IoUs are exact:

    IoU(g1, p1) = 0.26    IoU(g1, p2) = 0.32
    IoU(g2, p2) = 0.49    IoU(g3, p4) = 0.75

Proposal p2 straddles g1 and g2 and is the best overlap for both, so the
per-row-max metrics credit it twice; the ordered matcher pairs g1 with p1
instead.

``crossing_example`` has two ground-truth segments and three proposals:
p1 starts inside g1 but extends across g2, p2 sits at the end of g1 and
p3 is a late, partial hit on g2. Hungarian matching prefers
``(g1, p2), (g2, p1)``, which crosses in time; the ordered matcher picks
``(g1, p2), (g2, p3)``.
"""

from __future__ import annotations

from .segments import Segment, VideoAnnotation


def worked_example() -> tuple[VideoAnnotation, VideoAnnotation]:
    gt = VideoAnnotation(
        "worked-example",
        180.0,
        (Segment(0.0, 50.0), Segment(51.0, 118.0), Segment(130.0, 170.0)),
    )
    pred = VideoAnnotation(
        "worked-example",
        180.0,
        (
            Segment(0.0, 13.0),
            Segment(18.0, 100.0),
            Segment(120.0, 134.0),
            Segment(135.0, 165.0),
        ),
        ground_truth=False,
    )
    return gt, pred


def crossing_example() -> tuple[VideoAnnotation, VideoAnnotation]:
    gt = VideoAnnotation("crossing-example", 60.0, (Segment(0.0, 20.0), Segment(24.0, 44.0)))
    pred = VideoAnnotation(
        "crossing-example",
        60.0,
        (Segment(14.0, 44.0), Segment(15.0, 20.0), Segment(32.0, 52.0)),
        ground_truth=False,
    )
    return gt, pred
