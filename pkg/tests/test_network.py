import numpy as np
from pytest import approx, mark, raises

from nsotree.loss import CoxBatch, cox_nll_batch
from nsotree.network import (
    NSOTreeParams,
    backward,
    forward,
    forward_batch,
    init,
    init_linear,
    prox_step,
    risk_scores,
    sparsity,
)
from tests.utils import central_differences, linear_risk_params, relative_error


def test_init_single_layer() -> None:
    params = init(10, 1, 1, seed=0)

    assert params.depth == 1
    assert params.weights[0].shape == (1, 10)
    assert params.biases[0].shape == (1,)
    assert params.head_weights.shape == (11,)
    assert params.size == 10 + 1 + 11 + 1


def test_init_layer_input_lengths() -> None:
    params = init(10, 3, 1)

    assert [w.shape[1] for w in params.weights] == [10, 11, 12]
    assert params.head_weights.shape == (13,)


def test_init_wide_layers() -> None:
    params = init(4, 3, 2)

    assert [w.shape for w in params.weights] == [(2, 4), (2, 6), (2, 8)]
    assert params.feature_dim == 10


def test_init_bounds_and_zero_biases() -> None:
    params = init(9, 4, 2, seed=3)

    for w, b in zip(params.weights, params.biases):
        assert np.all(np.abs(w) <= 1 / np.sqrt(w.shape[1]))
        np.testing.assert_array_equal(b, 0.0)
    assert params.head_bias == 0.0


def test_init_is_deterministic() -> None:
    a, b = init(5, 3, 2, seed=11), init(5, 3, 2, seed=11)

    np.testing.assert_array_equal(a.to_vector(), b.to_vector())
    assert not np.array_equal(a.to_vector(), init(5, 3, 2, seed=12).to_vector())


@mark.parametrize("d,depth,dh", [(0, 1, 1), (3, 0, 1), (3, 2, 0)])
def test_init_invalid_dimensions(d: int, depth: int, dh: int) -> None:
    with raises(ValueError):
        init(d, depth, dh)


def test_params_reject_wrong_layer_width() -> None:
    with raises(ValueError):
        NSOTreeParams(
            weights=(np.zeros((1, 3)), np.zeros((1, 3))),
            biases=(np.zeros(1), np.zeros(1)),
            head_weights=np.zeros(5),
            head_bias=0.0,
            input_dim=3,
        )


def test_params_reject_non_finite() -> None:
    with raises(ValueError):
        NSOTreeParams(
            weights=(np.array([[np.nan, 0.0]]),),
            biases=(np.zeros(1),),
            head_weights=np.zeros(3),
            head_bias=0.0,
            input_dim=2,
        )


def test_vector_round_trip() -> None:
    params = init(4, 3, 2, seed=5)
    vector = params.to_vector()

    again = params.from_vector(vector)
    np.testing.assert_array_equal(again.to_vector(), vector)
    assert vector.size == params.size
    with raises(ValueError):
        params.from_vector(vector[:-1])


def test_init_linear() -> None:
    params = init_linear(6, seed=1)

    assert params.depth == 0
    assert params.head_weights.shape == (6,)
    x = np.random.default_rng(0).normal(size=(5, 6))
    np.testing.assert_allclose(risk_scores(params, x), x @ params.head_weights)


def single_split(d: int = 3) -> NSOTreeParams:
    w = np.zeros((1, d))
    w[0, :2] = (1.0, 2.0)
    head = np.zeros(d + 1)
    head[-1] = 1.0
    return NSOTreeParams(
        weights=(w,), biases=(np.zeros(1),), head_weights=head, head_bias=0.0, input_dim=d
    )


def test_forward_hand_case() -> None:
    x = np.array([1.0, 1.0, 0.0])

    relu = forward(single_split(), x, "relu")
    soft = forward(single_split(), x, "softplus")

    assert relu.score == 3.0
    assert soft.score == approx(3.048587351573742, abs=1e-12)
    assert relu.pattern.tolist() == [True]


def test_forward_softplus_at_zero() -> None:
    trace = forward(single_split(), np.zeros(3), "softplus")

    assert trace.activations[0][0] == approx(np.log(2.0))
    assert trace.pre_activations[0][0] == 0.0


def test_forward_dimension_mismatch() -> None:
    with raises(ValueError):
        forward(single_split(), np.zeros(4), "relu")
    with raises(ValueError):
        forward_batch(single_split(), np.zeros((2, 2)), "relu")


def test_forward_matches_batch() -> None:
    params = init(3, 4, 2, seed=2)
    x = np.random.default_rng(1).normal(size=(6, 3))

    batch = forward_batch(params, x, "softplus").scores
    for i in range(6):
        assert forward(params, x[i], "softplus").score == approx(batch[i], rel=1e-12)


def test_linear_hazard_construction() -> None:
    params = linear_risk_params()
    x = np.random.default_rng(0).uniform(-1, 1, size=(100, 2))

    np.testing.assert_allclose(risk_scores(params, x, "relu"), x[:, 0] + 2 * x[:, 1], atol=1e-9)


def test_relu_network_is_piecewise_linear() -> None:
    rng = np.random.default_rng(4)
    params = init(3, 4, 2, seed=4)

    checked = 0
    for _ in range(500):
        a = rng.normal(size=3)
        b = a + rng.normal(scale=0.05, size=3)
        if not np.array_equal(forward(params, a, "relu").pattern, forward(params, b, "relu").pattern):
            continue

        mid = forward(params, (a + b) / 2, "relu").score
        ends = (forward(params, a, "relu").score + forward(params, b, "relu").score) / 2
        assert mid == approx(ends, abs=1e-9)
        checked += 1

    assert checked > 100


def test_backward_zero_upstream() -> None:
    params = init(3, 2, 2, seed=0)
    grads = backward(params, np.ones((4, 3)), np.zeros(4))

    np.testing.assert_array_equal(grads.to_vector(), 0.0)


@mark.parametrize("mode", ["softplus", "relu"])
def test_backward_single_sample_matches_finite_differences(mode: str) -> None:
    params = init(3, 2, 1, seed=6)
    params = params.from_vector(params.to_vector() + 0.1)
    x = np.array([[0.3, -0.7, 1.1]])

    grads = backward(params, x, np.ones(1), mode)  # type: ignore[arg-type]
    numeric = central_differences(
        lambda v: float(risk_scores(params.from_vector(v), x, mode)[0]),  # type: ignore[arg-type]
        params.to_vector(),
    )

    assert relative_error(grads.to_vector(), numeric) < 1e-5


def test_backward_accumulates_over_the_batch() -> None:
    params = init(3, 3, 2, seed=1)
    x = np.array([[0.2, 0.4, -0.5]])

    single = backward(params, x, np.ones(1)).to_vector()
    double = backward(params, np.vstack([x, x]), np.ones(2)).to_vector()

    np.testing.assert_allclose(double, 2 * single, rtol=1e-14)


def test_backward_upstream_length() -> None:
    with raises(ValueError):
        backward(init(3, 1), np.ones((2, 3)), np.ones(3))


@mark.parametrize("seed", range(20))
def test_cox_gradient_through_the_network(seed: int) -> None:
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 6))
    depth = int(rng.integers(1, 5))
    dh = int(rng.integers(1, 3))
    n = int(rng.integers(3, 9))

    params = init(d, depth, dh, seed=seed)
    x = rng.normal(size=(n, d))
    times = rng.exponential(size=n)
    events = rng.random(n) < 0.7
    events[0] = True

    def loss(vector: np.ndarray) -> float:
        scores = risk_scores(params.from_vector(vector), x, "softplus")
        return cox_nll_batch(CoxBatch(scores, times, events))[0]

    trace = forward_batch(params, x, "softplus")
    _, upstream = cox_nll_batch(CoxBatch(trace.scores, times, events))
    grads = backward(params, x, upstream, "softplus", trace=trace)

    assert relative_error(grads.to_vector(), central_differences(loss, params.to_vector())) < 1e-5


def test_prox_hand_values() -> None:
    params = NSOTreeParams(
        weights=(np.array([[0.5, -0.1]]),),
        biases=(np.array([0.05]),),
        head_weights=np.array([0.1, 0.1, 0.1]),
        head_bias=0.0,
        input_dim=2,
    )

    out = prox_step(params, 0.2)

    np.testing.assert_allclose(out.weights[0], [[0.3, 0.0]])
    np.testing.assert_array_equal(out.biases[0], params.biases[0])
    np.testing.assert_array_equal(out.head_weights, params.head_weights)


def test_prox_zero_lambda_is_identity() -> None:
    params = init(3, 2)

    assert prox_step(params, 0.0) is params


def test_prox_negative_lambda() -> None:
    with raises(ValueError):
        prox_step(init(3, 2), -1e-3)


def test_prox_shrinks_survivors_by_lambda() -> None:
    params = init(6, 4, 2, seed=9)
    out = prox_step(params, 0.2)

    for before, after in zip(params.weights, out.weights):
        survived = after != 0
        np.testing.assert_allclose(np.abs(after[survived]), np.abs(before[survived]) - 0.2)
        assert np.all(np.abs(before[~survived]) <= 0.2)


def test_sparsity() -> None:
    params = init(2, 2, 2, seed=0)
    assert sparsity(params) == 0.0
    assert sparsity(prox_step(params, 10.0)) == 1.0

    weights = (np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([[1.0, 1.0, 0.0, 1.0], [1.0, 1.0, 1.0, 1.0]]))
    hand = NSOTreeParams(
        weights=weights,
        biases=(np.zeros(2), np.zeros(2)),
        head_weights=np.ones(6),
        head_bias=0.0,
        input_dim=2,
        hidden_dim=2,
    )
    assert sparsity(hand) == 0.25


def test_sparsity_without_layers() -> None:
    assert sparsity(init_linear(3)) == 0.0
