"""
Unit Tests for the attack families

Budget and range guarantees for every registered attack, the no-op paths,
exact geometry on an affine two-class model, and the shared helpers.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from fimguard.attacks.base import (
    AttackBudget,
    ce_input_gradient,
    finalize,
    least_likely_class,
    norm_of,
    project_l1,
    project_l2,
    project_linf,
)
from fimguard.attacks.cw import attack_cw_l2, from_tanh_space, to_tanh_space
from fimguard.attacks.deepfool import attack_deepfool
from fimguard.attacks.gradient import attack_bim, attack_fgm, attack_fgsm, attack_otcm, attack_pgd
from fimguard.attacks.jsma import attack_jsma, saliency_pair
from fimguard.attacks.registry import ATTACKS, AttackConfig, attack_names, run_attack
from fimguard.attacks.spectral import attack_ossa
from fimguard.core.gradcheck import finite_difference_gradient
from fimguard.core.tensor import Tensor
from fimguard.evaluation.robustness import fooling_ratio
from fimguard.models.network import classify

# l2 distance from 0.5 * ones to the affine model boundary
AFFINE_DISTANCE = 0.3
BUDGETED_EPSILON = {"ossa": 0.5, "fgm": 0.5, "fgsm": 0.1, "otcm": 0.1, "bim": 0.1, "pgd": 0.1}
ALL_ATTACKS = sorted(ATTACKS)


def correct_samples(net, dataset, count=4):
    predicted = classify(net, dataset.images)
    hits = np.nonzero(predicted == dataset.labels)[0][:count]
    assert hits.size == count
    return [(int(i), dataset.images[i], int(dataset.labels[i])) for i in hits]


@pytest.fixture
def attack_samples(trained_mlp, blob_split):
    return correct_samples(trained_mlp, blob_split[1])


class TestRegisteredAttacks:
    """Guarantees every attack gives through run_attack."""

    def test_registry_names(self):
        """Nine attacks, listed sorted."""
        assert attack_names() == ALL_ATTACKS
        assert len(ALL_ATTACKS) == 9

    @pytest.mark.parametrize("name", ALL_ATTACKS)
    def test_range_and_budget(self, name, trained_mlp, attack_samples):
        """x_adv stays in [0,1]; budgeted attacks stay within epsilon."""
        config = AttackConfig(name=name)
        epsilon = BUDGETED_EPSILON.get(name)
        for index, x, y in attack_samples:
            outcome = run_attack(trained_mlp, x, y, config, epsilon=epsilon, index=index)
            assert outcome.x_adv.min() >= 0.0 and outcome.x_adv.max() <= 1.0
            assert outcome.achieved_norm == pytest.approx(norm_of(outcome.eta, outcome.norm))
            if epsilon is not None:
                assert outcome.achieved_norm <= epsilon + 1e-6

    @pytest.mark.parametrize("name", ALL_ATTACKS)
    def test_deterministic(self, name, trained_mlp, attack_samples):
        """Identical inputs give bit-identical adversarial examples."""
        config = AttackConfig(name=name)
        index, x, y = attack_samples[0]
        first = run_attack(trained_mlp, x, y, config, BUDGETED_EPSILON.get(name), index)
        second = run_attack(trained_mlp, x, y, config, BUDGETED_EPSILON.get(name), index)
        assert np.array_equal(first.x_adv, second.x_adv)
        assert first.success == second.success

    @pytest.mark.parametrize("name", ALL_ATTACKS)
    def test_zero_budget_is_a_no_op(self, name, trained_mlp, attack_samples):
        """epsilon = 0 returns the input unchanged."""
        index, x, y = attack_samples[0]
        outcome = run_attack(trained_mlp, x, y, AttackConfig(name=name), epsilon=0.0, index=index)
        assert outcome.flag == "zero_budget"
        assert not outcome.success
        assert np.array_equal(outcome.x_adv.reshape(-1), x.reshape(-1))

    @pytest.mark.parametrize("name", ALL_ATTACKS)
    def test_already_misclassified(self, name, trained_mlp, attack_samples):
        """A sample whose prediction disagrees with y_true is returned unchanged."""
        index, x, y = attack_samples[0]
        wrong = (y + 1) % 3
        outcome = run_attack(trained_mlp, x, wrong, AttackConfig(name=name),
                             epsilon=BUDGETED_EPSILON.get(name), index=index)
        assert outcome.flag == "already_misclassified"
        assert not outcome.success
        assert outcome.label_after == outcome.label_before == y

    def test_pgd_seed_mixes_sample_index(self, trained_mlp, attack_samples):
        """PGD at index i starts from seed ^ i."""
        index, x, y = attack_samples[1]
        config = AttackConfig(name="pgd", seed=5)
        via_registry = run_attack(trained_mlp, x, y, config, epsilon=0.1, index=index)
        direct = attack_pgd(trained_mlp, x, y, config.budget(0.1), seed=5 ^ index)
        assert np.array_equal(via_registry.x_adv, direct.x_adv)

    def test_otcm_target_equal_to_true_label(self, trained_mlp, attack_samples):
        """An explicit OTCM target equal to the true label is rejected."""
        _, x, y = attack_samples[0]
        with pytest.raises(ValueError):
            run_attack(trained_mlp, x, y, AttackConfig(name="otcm", target=y), epsilon=0.1)

    def test_bim_l1_budget(self, trained_mlp, attack_samples):
        """BIM in l1 respects the l1 ball."""
        config = AttackConfig(name="bim", norm="l1", steps=5)
        for index, x, y in attack_samples:
            outcome = run_attack(trained_mlp, x, y, config, epsilon=0.8, index=index)
            assert outcome.norm == "l1"
            assert outcome.achieved_norm <= 0.8 + 1e-6

    def test_jsma_pixel_budget_is_whole(self, trained_mlp, attack_samples):
        """JSMA takes whole pixel counts and rejects fractional budgets."""
        _, x, y = attack_samples[0]
        with pytest.raises(ValueError):
            attack_jsma(trained_mlp, x, None, AttackBudget(norm="l0", epsilon=1.5), y_true=y)
        outcome = attack_jsma(trained_mlp, x, None, AttackBudget(norm="l0", epsilon=2.0), y_true=y)
        assert outcome.achieved_norm <= 2

    def test_records_are_flat(self, trained_mlp, attack_samples):
        """as_record holds scalars only, target -1 when untargeted."""
        _, x, y = attack_samples[0]
        record = run_attack(trained_mlp, x, y, AttackConfig(name="fgm"), epsilon=0.5).as_record()
        assert record["target"] == -1
        assert set(record) == {"norm", "achieved_norm", "success", "label_before",
                               "label_after", "target", "queries", "steps_taken", "flag"}


class TestAffineGeometry:
    """On the affine model the boundary sits at l2 distance 0.3 along -w."""

    def test_deepfool_near_minimal(self, affine_net, affine_x):
        """DeepFool lands within 2.5% above the exact distance."""
        outcome = attack_deepfool(affine_net, affine_x, y_true=0)
        assert outcome.success
        assert AFFINE_DISTANCE <= outcome.achieved_norm <= AFFINE_DISTANCE * 1.025

    def test_deepfool_cap(self, affine_net, affine_x):
        """A cap below the boundary distance rejects the success."""
        outcome = attack_deepfool(affine_net, affine_x, AttackBudget(norm="l2", epsilon=0.2,
                                                                      steps=50), y_true=0)
        assert not outcome.success
        assert outcome.flag == "over_budget"

    def test_cw_near_minimal(self, affine_net, affine_x):
        """CW-l2 finds a success within 10% of the exact distance."""
        outcome = attack_cw_l2(affine_net, affine_x, 0, c=1.0, lr=0.01, steps=200)
        assert outcome.success
        assert abs(outcome.achieved_norm - AFFINE_DISTANCE) <= 0.1 * AFFINE_DISTANCE

    def test_cw_without_hinge_stays_put(self, affine_net, affine_x):
        """c = 0 only minimizes distance, so no success is found."""
        outcome = attack_cw_l2(affine_net, affine_x, 0, c=0.0, steps=20)
        assert not outcome.success
        assert outcome.flag == "no_success"

    def test_fgm_threshold(self, affine_net, affine_x):
        """FGM flips the label exactly when epsilon exceeds the distance."""
        assert not attack_fgm(affine_net, affine_x, 0, AttackBudget(epsilon=0.2)).success
        assert attack_fgm(affine_net, affine_x, 0, AttackBudget(epsilon=0.5)).success

    def test_fgsm_threshold(self, affine_net, affine_x):
        """Sign steps of 0.1 fall short, 0.2 cross."""
        assert not attack_fgsm(affine_net, affine_x, 0, AttackBudget(norm="linf", epsilon=0.1)).success
        assert attack_fgsm(affine_net, affine_x, 0, AttackBudget(norm="linf", epsilon=0.2)).success

    def test_ossa_moves_against_w(self, affine_net, affine_x):
        """The spectral step points along -w and carries the eigenvalue."""
        outcome = attack_ossa(affine_net, affine_x, 0, AttackBudget(epsilon=0.5))
        assert outcome.success
        unit = outcome.eta.reshape(-1) / np.linalg.norm(outcome.eta)
        np.testing.assert_allclose(unit, -0.5 * np.ones(4), atol=1e-6)
        assert outcome.extra["lambda_max"] > 0.0

    def test_bim_linf_budget(self, affine_net, affine_x):
        """Iterates are projected back into the linf ball."""
        outcome = attack_bim(affine_net, affine_x, 0, AttackBudget(norm="linf", epsilon=0.2,
                                                                    steps=4))
        assert outcome.achieved_norm <= 0.2 + 1e-12
        assert outcome.success

    def test_targeted_success_requires_a_change(self, affine_net, affine_x):
        """A target equal to the current label never counts as success."""
        outcome = finalize(affine_net, affine_x, affine_x.copy(), "l2", 0, target=0)
        assert not outcome.success


class TestGradientAttackProperties:
    """Relations between the gradient attacks on the trained blob model."""

    @pytest.fixture
    def interior_x(self, trained_mlp):
        """A sample far enough from 0 and 1 that small steps are never clipped."""
        x = np.random.default_rng(3).uniform(0.3, 0.7, size=trained_mlp.input_shape)
        return x, int(classify(trained_mlp, x[None])[0])

    def test_single_step_bim_is_fgsm(self, trained_mlp, interior_x, affine_net, affine_x):
        """BIM-linf with one step of size epsilon reproduces FGSM bit for bit."""
        one_step = AttackBudget(norm="linf", epsilon=0.125, steps=1, step_size=0.125)
        x, y = interior_x
        for net, sample, label in ((trained_mlp, x, y), (affine_net, affine_x, 0)):
            bim = attack_bim(net, sample, label, one_step)
            fgsm = attack_fgsm(net, sample, label, one_step)
            assert np.array_equal(bim.x_adv, fgsm.x_adv)
            assert bim.success == fgsm.success

    def test_otcm_lowers_target_cross_entropy(self, trained_mlp, attack_samples):
        """One target-class step reduces the cross-entropy of the target."""
        budget = AttackBudget(norm="linf", epsilon=0.02)
        for _, x, y in attack_samples:
            target = (y + 1) % 3
            outcome = attack_otcm(trained_mlp, x, target, budget, y_true=y)
            _, before = ce_input_gradient(trained_mlp, x, target)
            _, after = ce_input_gradient(trained_mlp, outcome.x_adv, target)
            assert outcome.target == target
            assert after < before

    def test_fgm_follows_the_loss_gradient(self, trained_mlp, interior_x):
        """The FGM perturbation points along a finite-difference CE gradient."""
        x, y = interior_x
        outcome = attack_fgm(trained_mlp, x, y, AttackBudget(epsilon=1e-3))
        shape = (1,) + trained_mlp.input_shape
        numeric = finite_difference_gradient(
            lambda t: -trained_mlp.forward(t)[0, y].log(), Tensor(x.reshape(shape)), step=1e-6
        ).data.reshape(-1)
        eta = outcome.eta.reshape(-1)
        cosine = eta @ numeric / (np.linalg.norm(eta) * np.linalg.norm(numeric))
        assert cosine >= 0.99

    @pytest.mark.parametrize("epsilon", [0.05, 0.1, 0.2])
    def test_pgd_fools_at_least_as_often_as_fgsm(self, trained_mlp, blob_split, epsilon):
        """Iterating with projection never loses to the single sign step."""
        test_set = blob_split[1]
        fgsm, n_fgsm, _ = fooling_ratio(trained_mlp, AttackConfig(name="fgsm"), test_set,
                                        epsilon=epsilon)
        pgd, n_pgd, _ = fooling_ratio(trained_mlp, AttackConfig(name="pgd", steps=20, seed=1),
                                      test_set, epsilon=epsilon)
        assert n_fgsm == n_pgd
        assert pgd >= fgsm

    def test_bim_fooling_grows_with_steps(self, trained_mlp, blob_split):
        """At a fixed step size, more BIM steps fool at least as many samples."""
        test_set = blob_split[1]
        ratios = [
            fooling_ratio(trained_mlp, AttackConfig(name="bim", norm="linf", steps=steps,
                                                    step_size=0.02),
                          test_set, epsilon=0.1)[0]
            for steps in (1, 5, 20)
        ]
        assert ratios == sorted(ratios)


class TestHelpers:
    """Norms, projections and small utilities."""

    def test_norms(self):
        """l0 counts changes above tolerance."""
        eta = np.array([0.5, -2.0, 1e-13, 0.0])
        assert norm_of(eta, "l0") == 2.0
        assert norm_of(eta, "l1") == pytest.approx(2.5 + 1e-13)
        assert norm_of(eta, "linf") == 2.0
        with pytest.raises(ValueError):
            norm_of(eta, "l3")

    def test_projections(self):
        """Each projection lands on its ball."""
        np.testing.assert_allclose(project_l2(np.array([3.0, 4.0]), 1.0), [0.6, 0.8])
        np.testing.assert_allclose(project_linf(np.array([0.3, -0.7]), 0.5), [0.3, -0.5])
        np.testing.assert_allclose(project_l1(np.array([3.0, -1.0, 0.0]), 2.0), [2.0, 0.0, 0.0])
        inside = np.array([0.1, -0.2])
        assert project_l1(inside, 1.0) is inside

    def test_tanh_space_round_trip(self):
        """The shrink keeps the endpoints finite."""
        x = np.array([0.0, 0.25, 1.0])
        w = to_tanh_space(x)
        assert np.all(np.isfinite(w))
        np.testing.assert_allclose(from_tanh_space(w), x, atol=1e-6)

    def test_least_likely_excludes_reference(self):
        """The excluded class is never picked."""
        p = np.array([0.1, 0.6, 0.3])
        assert least_likely_class(p) == 0
        assert least_likely_class(p, exclude=0) == 2

    def test_saliency_pair(self):
        """The admissible pair with the largest A*|B| wins."""
        jacobian = np.array([[1.0, 2.0, -1.0], [-1.0, -3.0, 2.0]])
        assert saliency_pair(jacobian, 0, np.arange(3)) == (0, 1)
        assert saliency_pair(jacobian, 0, np.array([0, 2])) is None
        assert saliency_pair(jacobian, 0, np.array([1])) is None

    def test_budget_step_size(self):
        """Default step size is 2.5 * epsilon / steps."""
        assert AttackBudget(epsilon=1.0, steps=10).resolved_step_size() == pytest.approx(0.25)
        with pytest.raises(ValueError):
            AttackBudget().required_epsilon()

    def test_zero_gradient(self, monkeypatch, affine_net, affine_x):
        """A vanishing gradient leaves FGSM at the input."""
        monkeypatch.setattr("fimguard.attacks.gradient.ce_input_gradient",
                            lambda net, x, label: (np.zeros_like(x), 0.0))
        outcome = attack_fgsm(affine_net, affine_x, 0, AttackBudget(norm="linf", epsilon=0.1))
        assert outcome.flag == "zero_gradient"
        assert norm_of(outcome.eta, "linf") == 0.0


class TestAttackConfig:
    """Validation of configured attacks."""

    def test_unknown_name(self):
        """Unknown attack names list the valid ones."""
        with pytest.raises(ValidationError, match="valid names"):
            AttackConfig(name="nope")

    def test_name_is_normalized(self):
        """Names are case-insensitive."""
        assert AttackConfig(name=" DeepFool ").name == "deepfool"

    def test_grid_must_increase(self):
        """Grids are strictly increasing and nonnegative."""
        with pytest.raises(ValidationError):
            AttackConfig(name="fgm", epsilon_grid=[1.0, 1.0])
        with pytest.raises(ValidationError):
            AttackConfig(name="fgm", epsilon_grid=[-1.0, 1.0])

    def test_unsupported_norm(self):
        """Asking FGSM for an l2 budget fails when the budget is built."""
        with pytest.raises(ValueError):
            AttackConfig(name="fgsm", norm="l2").budget(0.1)

    def test_default_steps(self):
        """Iterative attacks default to ten steps, DeepFool to fifty."""
        assert AttackConfig(name="bim").budget(0.1).steps == 10
        assert AttackConfig(name="deepfool").budget().steps == 50
