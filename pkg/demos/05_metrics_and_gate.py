#!/usr/bin/env python3
"""Accuracy metrics and the FP32-relative gate.

Submissions must reach a fraction of the FP32 reference model's accuracy:
99.9% for the 2D tasks, 99% for the 3D task. The gate is a pure comparison;
the metrics below (single-threshold mAP, confusion-matrix mIoU) are the
desk-scale accuracy scripts.
"""

from rtbench import BBox, SegmentationMask, accuracy_gate, iou, mean_ap, miou

# Geometry: two unit-offset squares overlap by 1/7 of their union.
print("iou((0,0,2,2),(1,1,3,3)) =", iou(BBox(0, 0, 2, 2), BBox(1, 1, 3, 3)))

# Detection: a perfect match ranked above a stray box keeps AP at 1.0; rank
# the stray box first and half the area under the curve is gone.
gts = [(0, BBox(0, 0, 10, 10))]
good_first = [(0, BBox(0, 0, 10, 10, score=0.9)), (0, BBox(50, 50, 60, 60, score=0.8))]
stray_first = [(0, BBox(0, 0, 10, 10, score=0.8)), (0, BBox(50, 50, 60, 60, score=0.9))]
print("mAP, true positive ranked first:", mean_ap(good_first, gts))
print("mAP, false positive ranked first:", mean_ap(stray_first, gts))

# Segmentation: one wrong pixel out of four.
truth = SegmentationMask(2, 2, [0, 0, 1, 1])
pred = SegmentationMask(2, 2, [0, 1, 1, 1])
print("mIoU with one mislabeled pixel:", miou(pred, truth, 2))

# The gate, using the detection reference value the ssd profile carries.
print()
reference = 0.7141
for measured in (0.7141, 0.7100, 0.6943, 0.6483):
    result = accuracy_gate(measured, reference, 0.999)
    print(
        f"measured {measured:.4f} vs threshold {result.threshold:.6f} "
        f"-> {'pass' if result.passed else 'fail'}"
    )
print("\nthe same 0.6943 would pass a 99% constraint:",
      accuracy_gate(0.6943, reference, 0.99).passed)
