"""Spatiotemporal filtering: embedding, references, Fisher solve, scoring."""

import math

import numpy as np
import pytest

from ssvepkit.codebook import build_codebook
from ssvepkit.errors import CorruptDataError
from ssvepkit.sigproc import FilterBank, BandSpec, default_filter_bank
from ssvepkit.tdca import (
    ScoreVector,
    TdcaConfig,
    band_weight,
    class_templates,
    delay_embed,
    discriminant_scatters,
    fit_spatiotemporal_filter,
    load_model,
    project_augment,
    save_model,
    score_batch,
    score_trial,
    sincos_projector,
    sincos_reference,
    train,
)


def test_band_weights_match_direct_evaluation():
    assert band_weight(1) == 1.25
    # independent arithmetic path: exp(-a ln m) + b
    for m in (2, 3, 4, 5):
        expected = math.exp(-1.25 * math.log(m)) + 0.25
        assert abs(band_weight(m) - expected) <= 1e-9
    with pytest.raises(ValueError):
        band_weight(0)


def test_delay_embed_hand_example():
    x = np.array([[1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]])
    out = delay_embed(x, n_window=4, delay_order=1)
    expected = np.array(
        [
            [1.0, 2.0, 3.0, 4.0],
            [5.0, 6.0, 7.0, 8.0],
            [2.0, 3.0, 4.0, 0.0],
            [6.0, 7.0, 8.0, 0.0],
        ]
    )
    assert np.array_equal(out, expected)


def test_delay_embed_consumes_real_tail_samples():
    x = np.array([[1.0, 2.0, 3.0, 4.0, 9.0], [5.0, 6.0, 7.0, 8.0, 10.0]])
    out = delay_embed(x, n_window=4, delay_order=1)
    assert np.array_equal(out[2], [2.0, 3.0, 4.0, 9.0])
    assert np.array_equal(out[3], [6.0, 7.0, 8.0, 10.0])


def test_delay_embed_order_zero_is_identity():
    x = np.arange(12.0).reshape(3, 4)
    assert np.array_equal(delay_embed(x, 3, 0), x[:, :3])


def test_sincos_reference_values():
    y = sincos_reference(8.0, 1, 250.0, 4)
    assert y.shape == (2, 4)
    assert y[0, 0] == 0.0
    assert y[1, 0] == 1.0
    assert y[0, 1] == pytest.approx(math.sin(2 * math.pi * 8.0 / 250.0))

    assert sincos_reference(8.0, 5, 250.0, 10).shape == (10, 10)
    # highest default harmonic stays below Nyquist
    assert sincos_reference(15.8, 5, 250.0, 125).shape == (10, 125)
    with pytest.raises(ValueError):
        sincos_reference(15.8, 8, 250.0, 125)


def test_projector_fixes_its_range_and_kills_complement():
    y = sincos_reference(10.0, 2, 250.0, 125)
    in_span = np.array([2.0, -1.0, 0.5, 3.0]) @ y
    augmented = project_augment(in_span[None, :], y)
    assert np.allclose(augmented, np.hstack([in_span, in_span])[None, :], atol=1e-9)

    rng = np.random.default_rng(3)
    raw = rng.normal(size=125)
    p = sincos_projector(y)
    orthogonal = raw - raw @ p
    augmented = project_augment(orthogonal[None, :], y)
    assert np.allclose(augmented[0, 125:], 0.0, atol=1e-9)


def test_projector_idempotent_on_random_input():
    y = sincos_reference(12.4, 5, 250.0, 125)
    rng = np.random.default_rng(11)
    x = rng.normal(size=(7, 125))
    p = sincos_projector(y)
    xp = x @ p
    assert np.linalg.norm(xp @ p - xp) <= 1e-9 * np.linalg.norm(xp)


def test_projector_ridge_rescues_duplicated_rows():
    y = sincos_reference(10.0, 2, 250.0, 125)
    doubled = np.vstack([y, y[0]])  # rank-deficient Gram
    p = sincos_projector(doubled)
    assert np.all(np.isfinite(p))
    in_span = y[0]
    assert np.allclose(in_span @ p, in_span, atol=1e-6)


def test_class_templates_trivials():
    a = np.ones((2, 3))
    b = np.full((2, 3), 2.0)
    templates = class_templates([a, b], ["a", "b"])
    assert np.array_equal(templates["a"], a)
    templates = class_templates([a, a.copy()], ["a", "a"])
    assert np.array_equal(templates["a"], a)
    templates = class_templates([a, -a], ["a", "a"])
    assert np.allclose(templates["a"], 0.0)
    with pytest.raises(ValueError):
        class_templates([a], ["a"], classes=["a", "missing"])


def test_discriminant_scatters_match_loop_oracle():
    rng = np.random.default_rng(5)
    trials = rng.normal(size=(12, 4, 6))
    labels = np.repeat([0, 1, 2], 4)
    sb, sw = discriminant_scatters(trials, labels)

    flat = trials
    grand = flat.mean(axis=0)
    classes = [0, 1, 2]
    sb_ref = np.zeros((4, 4))
    sw_ref = np.zeros((4, 4))
    for c in classes:
        rows = flat[labels == c]
        mean_c = rows.mean(axis=0)
        d = mean_c - grand
        sb_ref += d @ d.T
        for r in rows:
            e = r - mean_c
            sw_ref += e @ e.T
    sb_ref /= len(classes)
    sw_ref /= len(flat)
    assert np.allclose(sb, sb_ref)
    assert np.allclose(sw, sw_ref)


def _toy_two_class(seed, n=400, noise=0.5, mean=(1.0, 0.0)):
    rng = np.random.default_rng(seed)
    mean = np.asarray(mean)
    a = mean + rng.normal(scale=noise, size=(n, 2))
    b = -mean + rng.normal(scale=noise, size=(n, 2))
    trials = np.vstack([a, b])[:, :, None]
    labels = np.array([0] * n + [1] * n)
    return trials, labels


def test_leading_filter_aligns_with_separation_axis():
    trials, labels = _toy_two_class(0, n=20000, noise=0.3)
    w = fit_spatiotemporal_filter(trials, labels, n_components=2)
    angle = math.degrees(math.atan2(w[1, 0], w[0, 0])) % 180.0
    assert min(angle, 180.0 - angle) < 1.0


def test_leading_filter_matches_grid_search():
    for seed in range(3):
        rng = np.random.default_rng(seed + 100)
        mean = rng.normal(size=2)
        trials, labels = _toy_two_class(seed, n=300, noise=0.8, mean=mean)
        w = fit_spatiotemporal_filter(trials, labels, n_components=1)
        sb, sw = discriminant_scatters(trials, labels)

        best_angle, best_val = None, -np.inf
        for deg in np.arange(0.0, 180.0, 0.1):
            v = np.array([math.cos(math.radians(deg)), math.sin(math.radians(deg))])
            val = (v @ sb @ v) / (v @ sw @ v)
            if val > best_val:
                best_val, best_angle = val, deg
        got = math.degrees(math.atan2(w[1, 0], w[0, 0])) % 180.0
        diff = abs(got - best_angle)
        assert min(diff, 180.0 - diff) < 1.0


def test_filter_direction_invariant_to_scale():
    trials, labels = _toy_two_class(7)
    w1 = fit_spatiotemporal_filter(trials, labels, n_components=1)
    w2 = fit_spatiotemporal_filter(trials * 10.0, labels, n_components=1)
    cosine = abs(float(w1[:, 0] @ w2[:, 0]))
    assert cosine == pytest.approx(1.0, abs=1e-6)


def test_rayleigh_quotient_beats_random_vectors():
    trials, labels = _toy_two_class(13, n=200, noise=1.0, mean=(0.7, 0.4))
    w = fit_spatiotemporal_filter(trials, labels, n_components=1)[:, 0]
    sb, sw = discriminant_scatters(trials, labels)
    ridge = 1e-6 * np.trace(sw) / 2 * np.eye(2)
    quotient = (w @ sb @ w) / (w @ (sw + ridge) @ w)
    rng = np.random.default_rng(99)
    for _ in range(1000):
        v = rng.normal(size=2)
        v /= np.linalg.norm(v)
        assert quotient >= (v @ sb @ v) / (v @ (sw + ridge) @ v) - 1e-9


def test_identical_templates_still_solve():
    rng = np.random.default_rng(21)
    base = rng.normal(size=(5, 3, 4))
    trials = np.concatenate([base, base])
    labels = np.array([0] * 5 + [1] * 5)
    w = fit_spatiotemporal_filter(trials, labels, n_components=3)
    assert w.shape == (3, 3)
    assert np.all(np.isfinite(w))
    assert np.allclose(np.linalg.norm(w, axis=0), 1.0)


def test_fit_validation():
    trials, labels = _toy_two_class(1, n=10)
    with pytest.raises(ValueError):
        fit_spatiotemporal_filter(trials, labels, n_components=3)
    bad = trials.copy()
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        fit_spatiotemporal_filter(bad, labels, n_components=1)


def test_trained_model_shapes(clean_model, clean_prepared):
    n_ch = len(clean_prepared.channel_names)
    d = (clean_model.delay_order + 1) * n_ch
    assert clean_model.filters.shape == (5, d, 8)
    assert clean_model.templates.shape == (5, 8, 2 * clean_model.n_window, 8)
    assert clean_model.n_classes == 8


def test_training_trial_scores_its_own_template_at_weight_sum(clean_prepared):
    # train without tail samples so a noise-free training trial reproduces its
    # class template exactly at score time: r = 1 in every band
    data = clean_prepared.data[:, :, :, : clean_prepared.n_window]
    model = train(
        data,
        clean_prepared.labels,
        clean_prepared.codebook,
        clean_prepared.sampling_rate,
        clean_prepared.n_window,
        channel_names=clean_prepared.channel_names,
    )
    weight_sum = sum(band_weight(m) for m in range(1, 6))
    scores = score_batch(model, data[:3], model.n_window)
    for i in range(3):
        true_idx = model.classes.index(clean_prepared.labels[i])
        assert scores[i, true_idx] == pytest.approx(weight_sum, abs=1e-9)
        assert int(np.argmax(scores[i])) == true_idx
        assert scores[i].max() <= weight_sum + 1e-9
        assert scores[i].min() >= 0.0


def test_tail_trained_model_still_ranks_training_trial_first(clean_model, clean_prepared):
    scores = score_batch(clean_model, clean_prepared.data[:3], clean_model.n_window)
    for i in range(3):
        true_idx = clean_model.classes.index(clean_prepared.labels[i])
        assert int(np.argmax(scores[i])) == true_idx


def test_scores_invariant_to_test_trial_scale(clean_model, clean_prepared):
    trial = clean_prepared.data[5]
    a = score_batch(clean_model, trial[None], clean_model.n_window)[0]
    b = score_batch(clean_model, (25.0 * trial)[None], clean_model.n_window)[0]
    assert np.allclose(a, b, atol=1e-9)


def test_zero_variance_test_trial_scores_zero(clean_model):
    shape = (1, 5, clean_model.n_channels, clean_model.n_window)
    scores = score_batch(clean_model, np.zeros(shape), clean_model.n_window)
    assert np.allclose(scores, 0.0)


def test_score_trial_accepts_epoch_and_band_input(clean_model, clean_dataset, clean_prepared):
    epoch = next(iter(clean_dataset.trials()))
    from ssvepkit.sigproc import decimate, extract_epoch

    cut = decimate(extract_epoch(epoch, 0.14, 0.5, tail_samples=16), 4)
    sv = score_trial(clean_model, cut, duration=0.5)
    idx = [i for i, lab in enumerate(clean_prepared.labels) if lab == epoch.label][0]
    band_trial = clean_prepared.data[idx]
    sv_band = score_trial(clean_model, band_trial, duration=0.5)
    assert sv.predicted == epoch.label
    assert sv_band.predicted == epoch.label
    assert np.allclose(sv.scores, sv_band.scores, atol=1e-9)


def test_score_vector_tie_breaks_to_lowest_index(clean_model):
    sv = ScoreVector(np.array([0.5, 0.9, 0.9, 0.1]), clean_model.classes[:4])
    assert sv.best_index == 1
    assert sv.margin == pytest.approx(0.0)


def test_short_window_zero_pads(clean_model, clean_prepared):
    short = round(0.1 * clean_model.sampling_rate)
    scores = score_batch(clean_model, clean_prepared.data, short)
    pred = np.argmax(scores, axis=1)
    truth = [clean_model.classes.index(lab) for lab in clean_prepared.labels]
    assert np.array_equal(pred, truth)


def test_single_band_order_zero_model_still_separates(clean_prepared):
    config = TdcaConfig(
        delay_order=0,
        filter_bank=FilterBank((BandSpec(6.0, 90.0),)),
        n_components=8,
    )
    model = train(
        clean_prepared.data[:, :1],
        clean_prepared.labels,
        clean_prepared.codebook,
        clean_prepared.sampling_rate,
        clean_prepared.n_window,
        config,
        channel_names=clean_prepared.channel_names,
    )
    assert model.n_bands == 1
    scores = score_batch(model, clean_prepared.data[:, :1], model.n_window)
    pred = np.argmax(scores, axis=1)
    truth = [model.classes.index(lab) for lab in clean_prepared.labels]
    assert np.array_equal(pred, truth)


def test_train_requires_every_class(clean_prepared):
    keep = [i for i, lab in enumerate(clean_prepared.labels) if lab.numeric_label != 7]
    with pytest.raises(ValueError, match="7"):
        train(
            clean_prepared.data[keep],
            [clean_prepared.labels[i] for i in keep],
            clean_prepared.codebook,
            clean_prepared.sampling_rate,
            clean_prepared.n_window,
        )


def test_train_rejects_bad_input(clean_prepared):
    bad = clean_prepared.data.copy()
    bad[0, 0, 0, 0] = np.inf
    with pytest.raises(ValueError):
        train(
            bad,
            clean_prepared.labels,
            clean_prepared.codebook,
            clean_prepared.sampling_rate,
            clean_prepared.n_window,
        )
    with pytest.raises(ValueError):
        train(
            clean_prepared.data,
            clean_prepared.labels,
            clean_prepared.codebook,
            clean_prepared.sampling_rate,
            clean_prepared.n_window,
            TdcaConfig(n_components=1000),
        )


def test_model_round_trip(tmp_path, clean_model, clean_prepared):
    path = tmp_path / "model.bin"
    save_model(clean_model, path)
    clone = load_model(path)
    assert np.array_equal(clone.filters, clean_model.filters)
    assert np.array_equal(clone.templates, clean_model.templates)
    assert clone.classes == clean_model.classes
    assert clone.channel_names == clean_model.channel_names
    assert clone.sampling_rate == clean_model.sampling_rate
    a = score_batch(clean_model, clean_prepared.data[:2], clean_model.n_window)
    b = score_batch(clone, clean_prepared.data[:2], clone.n_window)
    assert np.array_equal(a, b)


def test_model_load_rejects_corruption(tmp_path, clean_model):
    path = tmp_path / "model.bin"
    save_model(clean_model, path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(CorruptDataError):
        load_model(path)
