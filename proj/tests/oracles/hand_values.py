"""Independent re-derivation of the frozen loss/metric values used in the C++ tests.

Plain Python floats only; nothing here touches the C++ implementation.
"""
import math
import sys


def weighted_single_fg(p_fg=0.8, fg_weight=2.0):
    return -fg_weight * math.log(p_fg)


def multitask_example():
    y = (1.0, 0.0)
    y_hat = (0.6, 0.4)
    d = (0.2, 0.4)
    d_hat = (0.1, 0.5)
    e_class = -math.log(y_hat[0])
    e_dist = sum((a - b) ** 2 for a, b in zip(d, d_hat))
    inter = min(d[0], d_hat[0]) + min(d[1], d_hat[1])
    union = max(d[0], d_hat[0]) + max(d[1], d_hat[1])
    eps = 1e-8
    ratio = (inter + eps) / (union + eps)
    e_conf = sum((yk - pk * ratio) ** 2 for yk, pk in zip(y, y_hat))
    total = 1.0 * e_class + 2.0 * e_dist + 1.0 * e_conf
    return dict(e_class=e_class, e_dist=e_dist, iou=inter / union, e_conf=e_conf, total=total)


def counting_example():
    tp, fp, fn, n_truth = 8, 1, 2, 10
    return dict(f1=2 * tp / (2 * tp + fp + fn), er=(fp + fn) / n_truth)


# Values frozen into the C++ tests (tests/unit/test_losses.cpp,
# tests/acceptance/acceptance.cpp). --check re-derives and compares them.
FROZEN = {
    "weighted": 0.4462871026284194,
    "e_class": 0.5108256237659907,
    "e_dist": 0.02,
    "iou": 5.0 / 7.0,
    "e_conf": 0.40816326344023324,
    "total": 0.958988887206224,
    "f1": 16.0 / 19.0,
    "er": 0.3,
}


def check():
    derived = dict(weighted=weighted_single_fg(), **multitask_example(), **counting_example())
    bad = [k for k, v in FROZEN.items() if abs(derived[k] - v) > 1e-12]
    for k in FROZEN:
        print(f"{k}: derived {derived[k]!r} frozen {FROZEN[k]!r}")
    if bad:
        print("mismatch:", ", ".join(bad))
        return 1
    return 0


if __name__ == "__main__":
    if "--check" in sys.argv:
        sys.exit(check())
    print("weighted", repr(weighted_single_fg()))
    for k, v in multitask_example().items():
        print("multitask", k, repr(v))
    for k, v in counting_example().items():
        print("metrics", k, repr(v))
    print("frames 1s@44100", (44100 - 4410) // 441 + 1)
