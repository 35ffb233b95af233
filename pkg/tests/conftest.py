from pathlib import Path

import pytest

from relalg import Form, Frame, RelAlgebroid, Scalar, VariableLevels

REGRESSIONS = Path(__file__).resolve().parent.parent / "regressions"


def regression_source(name: str) -> str:
    return (REGRESSIONS / name).read_text()


def regression_files():
    return sorted(REGRESSIONS.glob("*.ralg"))


@pytest.fixture
def surface_frame():
    return Frame(["theta1", "theta2", "theta3"])


def surface_dtheta(frame):
    """The orthonormal-frame-bundle equations shared by the surface examples."""
    one = Scalar.rational(1)
    K = Scalar.var("K")
    return [
        Form(frame, 2, {(2, 3): one}),  # D theta1 = -theta3^theta2
        Form(frame, 2, {(1, 3): -one}),  # D theta2 = theta3^theta1
        Form(frame, 2, {(1, 2): K}),
    ]


def unit_gradient_algebroid(frame=None):
    frame = frame or Frame(["theta1", "theta2", "theta3"])
    phi = Scalar.var("phi")
    return RelAlgebroid(
        frame,
        VariableLevels(["K"], ["phi"]),
        surface_dtheta(frame),
        [("K", Form(frame, 1, {(1,): Scalar.cos(phi), (2,): Scalar.sin(phi)}))],
    )


def action_extension_algebroid():
    frame = Frame(["theta1", "theta2"])
    one = Scalar.rational(1)
    z = Scalar.var("z")
    return RelAlgebroid(
        frame,
        VariableLevels(["x", "y"], ["z"]),
        [Form(frame, 2, {(1, 2): one}), Form.zero(frame, 2)],
        [("x", Form(frame, 1, {(1,): z})), ("y", Form(frame, 1, {(2,): z}))],
    )


def blocked_extension_algebroid():
    frame = Frame(["theta1", "theta2"])
    one = Scalar.rational(1)
    z = Scalar.var("z")
    return RelAlgebroid(
        frame,
        VariableLevels(["x", "y"], ["z"]),
        [Form(frame, 2, {(1, 2): one}), Form.zero(frame, 2)],
        [
            ("x", Form(frame, 1, {(1,): z})),
            ("y", Form(frame, 1, {(2,): z, (1,): -one})),
        ],
    )


def lie_algebra_bundle_algebroid():
    frame = Frame(["theta1", "theta2", "theta3"])
    s = Scalar.rational(1) + Scalar.var("x")
    return RelAlgebroid(
        frame,
        VariableLevels([], ["x"]),
        [
            Form(frame, 2, {(2, 3): s}),
            Form(frame, 2, {(1, 3): -s}),
            Form(frame, 2, {(1, 2): s}),
        ],
        [],
    )


def recursive_chain_algebroid():
    frame = Frame(["theta1", "theta2"])
    f = Scalar.func("f", [Scalar.var("x0")])
    return RelAlgebroid(
        frame,
        VariableLevels(["x0"], ["x1"], opaque=[("f", 1)]),
        [Form.zero(frame, 2), Form(frame, 2, {(1, 2): -f})],
        [("x0", Form(frame, 1, {(2,): Scalar.var("x1")}))],
    )


def hessian_algebroid():
    frame = Frame(["theta1", "theta2", "theta3"])
    K, K1, K2 = Scalar.var("K"), Scalar.var("K1"), Scalar.var("K2")
    a = Scalar.func("a", [K])
    b = Scalar.func("b", [K])
    return RelAlgebroid(
        frame,
        VariableLevels(["K", "K1", "K2"], [], opaque=[("a", 1), ("b", 1)]),
        surface_dtheta(frame),
        [
            ("K", Form(frame, 1, {(1,): K1, (2,): K2})),
            ("K1", Form(frame, 1, {(1,): a + b * K1**2, (2,): b * K1 * K2, (3,): -K2})),
            ("K2", Form(frame, 1, {(1,): b * K1 * K2, (2,): a + b * K2**2, (3,): K1})),
        ],
    )


def space_forms_algebroid():
    frame = Frame(["theta1", "theta2", "theta3"])
    return RelAlgebroid(
        frame,
        VariableLevels(["K"], []),
        surface_dtheta(frame),
        [("K", Form.zero(frame, 1))],
    )
