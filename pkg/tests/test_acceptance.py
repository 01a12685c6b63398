"""End-to-end acceptance checks, one test per criterion.

Criteria 8, 9 and 10 share a single training run on the seeded synthetic
tone dataset (session fixture). Run with ``pytest tests/test_acceptance.py``;
the PASS/FAIL summary prints at the end of the session.
"""

import time

import numpy as np
import pytest

from emorespond.audio_io import AudioSegment
from emorespond.cli import load_labelled_dir
from emorespond.content import generate, init_generator
from emorespond.dsp import StftConfig, mfcc, FeatureTensor, stft_power
from emorespond.emotion import DEFAULT_CATEGORIES, EmotionAgent, classifier_input, state_from_distribution
from emorespond.neural import TrainOptions, default_spec, forward, param_count, quantize_int8, train
from emorespond.pipeline import Annotation, Pipeline, PipelineConfig, run_batch, run_benchmark
from emorespond.policy import decide_mode, load_policy
from emorespond.safety import load_templates, verify
from emorespond.synthetic import tone_clip, tone_dataset, write_dataset

import gradcheck
import rulegen
from acceptance_report import criterion
from fixtures import ALL_PAIRS, StubEmotionAgent, strict_content, strict_rules, strict_templates
from oracles import brute_force_verify, hann_periodic, naive_dct2_ortho, naive_dft_power_matrix
from tables import EXPECTED_MODES, MODE_PARAMS, MODE_TEXT

TRAIN_OPTS = TrainOptions(lr=1e-3, epochs=12, batch=32, seed=0, patience=4, target_accuracy=1.0)


@pytest.fixture(scope="session")
def trained(tmp_path_factory):
    """Write 400 wavs, hold out 20%, train on the rest (model selection on a slice of the training part)."""
    start = time.perf_counter()
    root = tmp_path_factory.mktemp("tones")
    write_dataset(root, n_per_class=100, seed=0)
    data = load_labelled_dir(root, DEFAULT_CATEGORIES)
    order = np.random.default_rng(7).permutation(len(data))
    n_test = len(data) // 5
    test = [data[i] for i in order[:n_test]]
    rest = [data[i] for i in order[n_test:]]
    n_val = len(rest) // 5
    weights, trace = train(default_spec(), rest[n_val:], TRAIN_OPTS, validation=rest[:n_val])
    tx = np.stack([x.data for x, _ in test]).astype(np.float32)
    ty = np.array([y for _, y in test])
    return {"weights": weights, "trace": trace, "test": (tx, ty), "n_files": len(data),
            "elapsed": time.perf_counter() - start}


def test_criterion_1_layer_parameter_counts():
    with criterion(1, "per-layer parameter counts", 1) as notes:
        counts = param_count(default_spec(4), "table")
        assert [n for _, n in counts["layers"]] == [320, 18496, 73856, 128 * 4]
        assert counts["total"] == 93184
        notes.append(f"total {counts['total']}")


def test_criterion_2_policy_table():
    with criterion(2, "emotion x arousal -> mode mapping", 1) as notes:
        policy = load_policy()
        for (emotion, arousal), mode in EXPECTED_MODES.items():
            dist = np.full(4, 0.1)
            dist[DEFAULT_CATEGORIES.index(emotion)] = 0.7
            state = state_from_distribution(dist, DEFAULT_CATEGORIES, 0.9 if arousal == "high" else 0.1, 0.5)
            assert decide_mode(state, policy).value == mode, (emotion, arousal)
        notes.append("8/8 pairs")


def test_criterion_3_generator_table():
    with criterion(3, "factory generator reproduces the parameter table", 1) as notes:
        net = init_generator(n_rules=3)
        worst = 0.0
        for mode, row in MODE_PARAMS.items():
            p = generate(mode, net)
            for field, value in row.items():
                worst = max(worst, abs(getattr(p, field) - value))
            worst = max(worst, abs(p.sentiment - MODE_TEXT[mode][0]))
        assert worst <= 1e-6
        notes.append(f"24 cells, worst diff {worst:.1e}")


def test_criterion_4_safety_totality():
    with criterion(4, "safety totality over 10,000 jittered runs", 60) as notes:
        k = 3
        cfg = PipelineConfig(rules=strict_rules(), templates=strict_templates(), content=strict_content(),
                             jitter=True, max_iterations=k, seed=0)
        pipeline = Pipeline(cfg, StubEmotionAgent(ALL_PAIRS))
        segment = AudioSegment(np.zeros(48000))
        metrics, outputs = run_batch([segment] * 10_000, pipeline)
        assert all(o.verified for o in outputs)
        assert metrics.compliance_rate == 1.0
        assert max(o.attempts_used for o in outputs) <= k
        assert metrics.regeneration_rate > 0
        notes.append(f"regeneration {metrics.regeneration_rate:.3f}, fallback {metrics.fallback_rate:.4f}")


def test_criterion_5_latency(trained):
    with criterion(5, "mean end-to-end latency under 100 ms", 300) as notes:
        pipeline = Pipeline(PipelineConfig(), EmotionAgent(trained["weights"]))
        metrics, _ = run_benchmark(pipeline, iterations=200, warmup=20)
        mean = metrics.latency_ms["total"]["mean"]
        notes.append(f"mean {mean:.1f} ms, p99 {metrics.latency_ms['total']['p99']:.1f} ms")
        assert mean < 100.0


def test_criterion_6_dsp_oracles():
    with criterion(6, "FFT and DCT agree with naive transforms", 30) as notes:
        rng = np.random.default_rng(6)
        window = np.array(hann_periodic(400))
        worst_fft = 0.0
        for _ in range(100):
            frame = rng.uniform(-1, 1, 400)
            fast = stft_power(AudioSegment(frame), StftConfig())[:, 0]
            worst_fft = max(worst_fft, float(np.max(np.abs(fast - naive_dft_power_matrix(frame * window, 512)))))
        worst_dct = 0.0
        for _ in range(100):
            col = rng.normal(0, 5, 64)
            fast = mfcc(FeatureTensor(col[:, None, None], np.zeros(1)), 64)[:, 0]
            worst_dct = max(worst_dct, float(np.max(np.abs(fast - naive_dct2_ortho(col)))))
        notes.append(f"fft {worst_fft:.1e}, dct {worst_dct:.1e}")
        assert worst_fft < 1e-6 and worst_dct < 1e-9


def test_criterion_7_gradient_check():
    with criterion(7, "backprop matches central differences", 60) as notes:
        worst, total = 0.0, 0
        for seed in range(4):
            spec, w, x = gradcheck.fixture(seed=seed, kernel_std=0.3)
            err, count, _ = gradcheck.check(spec, w, x, target=seed % 4, eps=1e-5)
            worst, total = max(worst, err), total + count
        notes.append(f"{total} components, worst rel err {worst:.1e}")
        assert worst < 1e-4


def test_criterion_8_synthetic_training(trained):
    with criterion(8, "held-out accuracy on the synthetic tone set", 600) as notes:
        tx, ty = trained["test"]
        spec = default_spec()
        preds = np.array([np.argmax(forward(spec, trained["weights"], x)) for x in tx])
        acc = float(np.mean(preds == ty))
        notes.append(f"{trained['n_files']} files, held-out {acc:.3f} on {len(ty)}, "
                     f"{len(trained['trace'].loss)} epochs in {trained['elapsed']:.0f}s")
        assert trained["n_files"] == 400
        assert trained["elapsed"] < 600
        assert acc >= 0.9


def test_criterion_9_quantization(trained):
    with criterion(9, "INT8 payload and argmax agreement", 60) as notes:
        spec = default_spec()
        weights = trained["weights"]
        q = quantize_int8(spec, weights)
        ratio = q.payload_bytes() / weights.payload_bytes()
        rng = np.random.default_rng(9)
        agree = 0
        for _ in range(500):
            clip = tone_clip(str(rng.choice(DEFAULT_CATEGORIES)), str(rng.choice(["low", "high"])), rng)
            x = classifier_input(clip.segment()).data
            agree += int(np.argmax(forward(spec, weights, x)) == np.argmax(forward(spec, q, x)))
        notes.append(f"ratio {ratio:.4f}, agreement {agree / 500:.3f}")
        assert ratio <= 0.26
        assert agree / 500 >= 0.95


def test_criterion_10_ablation_direction(trained):
    with criterion(10, "ablations move the metrics the right way", 60) as notes:
        clips = tone_dataset(12, seed=10)
        segments = [c.segment() for c in clips]
        labels = [Annotation(EXPECTED_MODES[(c.category, c.arousal)]) for c in clips]
        agent = EmotionAgent(trained["weights"])
        full, _ = run_batch(segments, Pipeline(PipelineConfig(), agent), labels)
        no_policy, _ = run_batch(segments, Pipeline(PipelineConfig(bypass_policy=True), agent), labels)
        no_safety, _ = run_batch(segments, Pipeline(PipelineConfig(bypass_safety=True, jitter=True), agent), labels)
        notes.append(f"consistency {full.mode_consistency:.3f} vs no-policy {no_policy.mode_consistency:.3f}, "
                     f"no-safety compliance {no_safety.compliance_rate:.3f}")
        assert no_policy.mode_consistency < full.mode_consistency
        assert no_safety.compliance_rate < 1.0


def test_criterion_11_verifier_equivalence():
    with criterion(11, "verifier equals per-rule re-evaluation", 10) as notes:
        rng = np.random.default_rng(11)
        for _ in range(1000):
            templates_raw = rulegen.random_templates(rng)
            rules_raw = rulegen.random_rules(rng)
            profile = str(rng.choice(["child", "general"]))
            values, params = rulegen.random_params(rng, templates_raw)
            res = verify(params, rulegen.unchecked_ruleset(rules_raw, profile),
                         load_templates({"templates": list(templates_raw.values())}))
            passed, mask = brute_force_verify(values, rules_raw, profile, templates_raw)
            assert res.passed == passed and res.mask.tolist() == mask
        notes.append("1000/1000 identical")
