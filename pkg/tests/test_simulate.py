import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from irtax.core import DomainError, Link, is_guttman
from irtax.mixtures import MixtureModel, NonContingentComponent
from irtax.models import AdjacentItem, CumulativeItem, NominalItem, SequentialItem
from irtax.simulate import (GENERATOR_ID, ResponseDataset, SimulationConfig, dataset_guttman_expand,
                            inverse_cdf_sample, latent_threshold_sample, read_dataset,
                            sample_dataset, write_dataset)
from irtax.spec import ModelSpec
from irtax.trees import agree_extremity_tree

GRM_0 = np.array([0.2689414213699951, 0.4621171572600098, 0.2689414213699951])


def within_4se(counts, p):
    n = counts.sum()
    se = np.sqrt(p * (1 - p) / n)
    return np.all(np.abs(counts / n - p) <= 4 * se)


def test_uniform_pcm_frequencies():
    spec = ModelSpec((AdjacentItem((0.0, 0.0)),))
    data = sample_dataset(spec, SimulationConfig(100_000, seed=11, fixed_theta=0.0))
    assert within_4se(data.category_counts(0), np.full(3, 1 / 3))


def test_grm_frequencies_inverse_cdf():
    counts = np.bincount(inverse_cdf_sample(CumulativeItem((-1.0, 1.0)), 0.0, 5, 10**6), minlength=3)
    assert within_4se(counts, GRM_0)


def test_determinism():
    spec = ModelSpec((AdjacentItem((-1.0, 0.5)), agree_extremity_tree(), SequentialItem((0.2,))))
    cfg = SimulationConfig(500, seed=2**63 + 17, missing_rate=0.1)
    a, b = sample_dataset(spec, cfg), sample_dataset(spec, cfg)
    assert a.responses.tobytes() == b.responses.tobytes()
    assert a.traits.tobytes() == b.traits.tobytes()
    assert a.metadata["generator"] == GENERATOR_ID
    c = sample_dataset(spec, SimulationConfig(500, seed=1))
    assert not np.array_equal(a.responses, c.responses)


def test_person_streams_are_prefix_stable():
    # person p's draws do not depend on how many persons are generated
    spec = ModelSpec((AdjacentItem((0.0, 1.0)),) * 3)
    small = sample_dataset(spec, SimulationConfig(50, seed=9))
    big = sample_dataset(spec, SimulationConfig(300, seed=9))
    assert np.array_equal(small.responses, big.responses[:50])


def test_missing_rate():
    spec = ModelSpec((AdjacentItem((0.0,)),) * 10)
    data = sample_dataset(spec, SimulationConfig(4000, seed=3, missing_rate=0.25))
    assert abs((~data.mask).mean() - 0.25) < 0.01
    assert np.all(data.responses[data.mask] >= 0)


def test_config_validation():
    with pytest.raises(DomainError):
        SimulationConfig(0)
    with pytest.raises(DomainError):
        SimulationConfig(10, missing_rate=1.0)
    with pytest.raises(DomainError):
        SimulationConfig(10, seed=-1)


def test_inconsistent_trait_dims():
    from irtax.trees import binary_tree
    two = binary_tree((1, 2), {"n0": (1.0, 0.0)}, trait_dim=2)
    three = binary_tree((1, 2), {"n0": (1.0, 0.0, 0.0)}, trait_dim=3)
    with pytest.raises(DomainError):
        sample_dataset(ModelSpec((two, three)), SimulationConfig(5))


def test_mixture_classes():
    spec = ModelSpec((AdjacentItem((0.0, 0.0)),) * 4)
    mix = MixtureModel((spec, NonContingentComponent.uniform((3,) * 4)), (0.8, 0.2))
    data = sample_dataset(mix, SimulationConfig(5000, seed=4))
    assert abs((data.classes == 0).mean() - 0.8) < 4 * np.sqrt(0.16 / 5000)


def test_latent_threshold_examples():
    item = CumulativeItem((-1.0, 1.0))
    counts = np.bincount(latent_threshold_sample(item, 0.0, 8, size=10**6), minlength=3)
    assert within_4se(counts, GRM_0)
    assert np.all(latent_threshold_sample(CumulativeItem((0.0,)), 50.0, 1, size=1000) == 1)
    assert np.all(latent_threshold_sample(item, 0.0, 1, size=100, noise_scale=0.0) == 1)
    assert latent_threshold_sample(item, 0.0, 1, noise_scale=0.0) == 1
    with pytest.raises(DomainError):
        latent_threshold_sample(AdjacentItem((0.0,)), 0.0, 1)


@pytest.mark.parametrize("link", list(Link))
def test_latent_threshold_matches_inverse_cdf(link):
    item = CumulativeItem((-0.8, 0.1, 1.2), 1.3, link)
    a = np.bincount(latent_threshold_sample(item, 0.4, 21, size=10**6), minlength=4)
    b = np.bincount(inverse_cdf_sample(item, 0.4, 22, 10**6), minlength=4)
    _, p, _, _ = stats.chi2_contingency(np.vstack([a, b]))
    assert p > 0.001


def _random_item(rng, family, link):
    k = int(rng.integers(1, 5))
    d = tuple(np.sort(rng.uniform(-1.5, 1.5, k)))
    a = float(rng.uniform(0.5, 1.5))
    if family == "cumulative":
        return CumulativeItem(d, a, link)
    if family == "adjacent":
        return AdjacentItem(d, a, link)
    if family == "sequential":
        return SequentialItem(d, a, link)
    return NominalItem(tuple(rng.uniform(-1, 1, k)), tuple(rng.uniform(-1, 2, k)))


def test_distributional_agreement():
    rng = np.random.default_rng(2024)
    families = ["cumulative", "adjacent", "sequential", "nominal"]
    n = 10**6
    for draw in range(20):
        fam = families[draw % 4]
        item = _random_item(rng, fam, list(Link)[draw % 2])
        theta = float(rng.uniform(-1.5, 1.5))
        p = np.asarray(item.probs(theta))
        counts = np.bincount(inverse_cdf_sample(item, theta, 100 + draw, n), minlength=p.size)
        keep = p * n > 5
        expected = p[keep] * n
        observed = counts[keep]
        expected *= observed.sum() / expected.sum()
        assert stats.chisquare(observed, expected).pvalue > 0.001, (fam, item)


def test_guttman_expand():
    data = ResponseDataset(np.array([[2, 0], [-1, 1]]), (4, 2))
    exp = dataset_guttman_expand(data)
    assert exp.patterns[0][0].tolist() == [1, 1, 0]
    assert exp.patterns[1][0].tolist() == [0]
    assert exp.patterns[0][1].tolist() == [-1, -1, -1]
    assert exp.is_valid().all()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.floats(0, 0.5))
def test_guttman_expand_validity(seed, miss):
    spec = ModelSpec((AdjacentItem((0.0, 0.5, 1.0)), agree_extremity_tree(), CumulativeItem((0.0,))))
    data = sample_dataset(spec, SimulationConfig(50, seed=seed, missing_rate=miss))
    exp = dataset_guttman_expand(data)
    assert exp.is_valid().all()
    for p, i, bits in exp.rows():
        assert is_guttman(bits) and sum(bits) == data.responses[p, i]


def test_file_round_trip(tmp_path):
    spec = ModelSpec((AdjacentItem((0.0, 0.5)), SequentialItem((0.0,))))
    data = sample_dataset(spec, SimulationConfig(40, seed=5, missing_rate=0.2))
    path = tmp_path / "d.csv"
    write_dataset(data, path, {"note": "x"})
    back = read_dataset(path)
    assert np.array_equal(back.responses, data.responses)
    assert back.n_categories == data.n_categories
    assert back.metadata["seed"] == 5 and back.metadata["note"] == "x"
    assert path.read_text().splitlines()[0] == "item1,item2"


def test_read_dataset_errors(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,x\n")
    with pytest.raises(DomainError, match="bad.csv:2"):
        read_dataset(path)
    path.write_text("a,b\n1\n")
    with pytest.raises(DomainError, match="expected 2 fields"):
        read_dataset(path)
    path.write_text("a\n5\n")
    with pytest.raises(DomainError):
        read_dataset(path, n_categories=(3,))
