import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from nmrqsim.prodop import ProductTerm
from nmrqsim.spinsys import (
    ConfigError,
    CouplingMask,
    Spin,
    SpinSystem,
    free_hamiltonian,
    hamiltonian_diagonal,
    load_spin_system,
    serialize_spin_system,
    thermal_state,
)

TWO_SPIN_TEXT = """
[spins]
A  carbon13   100.0  1.0
B  carbon13  -250.0  1.0

[couplings]
A  B  40.0
"""


class TestBundledRegister:
    def test_layout(self, sys7):
        assert sys7.n_spins == 7
        assert sys7.labels == ("C1", "C2", "C3", "C4", "H1", "H2", "H3")
        assert [s.species for s in sys7.spins] == ["carbon13"] * 4 + ["proton"] * 3

    def test_coupling_lookup_is_symmetric(self, sys7):
        assert sys7.j("C1", "C2") == 41.6
        assert sys7.j("C2", "C1") == 41.6
        assert sys7.j("C1", "H1") == 0.0  # untabulated pair

    def test_moment_ratio_matches_gyromagnetic_quotient(self, sys7):
        # gamma_1H / gamma_13C from CODATA values
        gamma_h = 2.6752218744e8
        gamma_c = 6.728284e7
        ratio = sys7.spin("H1").moment / sys7.spin("C1").moment
        assert ratio == pytest.approx(gamma_h / gamma_c, abs=2e-3)

    def test_subsystem_keeps_internal_couplings(self, sys7):
        sub = sys7.subsystem(["C2", "H1"])
        assert sub.labels == ("C2", "H1")
        assert sub.j("C2", "H1") == 155.5
        assert ("C1", "C2") not in sub.couplings

    def test_subsystem_rejects_duplicates(self, sys7):
        with pytest.raises(ValueError, match="distinct"):
            sys7.subsystem(["C1", "C1"])


class TestParser:
    def test_round_trip(self, sys7):
        again = load_spin_system(serialize_spin_system(sys7))
        assert again == sys7

    def test_minimal_register(self):
        system = load_spin_system(TWO_SPIN_TEXT)
        assert system.labels == ("A", "B")
        assert system.j("A", "B") == 40.0

    def test_comments_and_blank_lines_ignored(self):
        system = load_spin_system(
            "# leading comment\n[spins]\nA proton 0.0 1.0  # inline\n\n"
        )
        assert system.n_spins == 1

    @pytest.mark.parametrize(
        "text, message, line",
        [
            ("[nuclei]\n", r"unknown section", 1),
            ("A proton 0 1\n", r"before any section", 1),
            ("[spins]\nA muon 0.0 1.0\n", r"unknown species", 2),
            ("[spins]\nA proton 0.0\n", r"4 fields", 2),
            ("[spins]\nA proton x 1.0\n", r"numeric", 2),
            ("[spins]\nA proton 0.0 -1.0\n", r"positive", 2),
            ("[spins]\nA proton 0 1\nA proton 0 1\n", r"duplicate", 3),
            ("[spins]\nA proton 0 1\n[couplings]\nA A 5\n", r"itself", 4),
            ("[spins]\nA proton 0 1\n[couplings]\nA B 5\n", r"unknown spin", 4),
            ("[spins]\nA proton 0 1\n[couplings]\nA 5\n", r"3 fields", 4),
            (
                "[spins]\nA proton 0 1\nB proton 1 1\n"
                "[couplings]\nA B 5\nB A 6\n",
                r"conflicting",
                6,
            ),
            ("# only comments\n", r"no \[spins\] rows", 1),
        ],
    )
    def test_errors_carry_position(self, text, message, line):
        with pytest.raises(ConfigError, match=message) as err:
            load_spin_system(text)
        assert err.value.line == line

    def test_repeated_pair_with_same_value_is_accepted(self):
        system = load_spin_system(
            "[spins]\nA proton 0 1\nB proton 1 1\n"
            "[couplings]\nA B 5\nB A 5\n"
        )
        assert system.j("A", "B") == 5.0


class TestValidation:
    def test_spin_field_checks(self):
        with pytest.raises(ValueError, match="species"):
            Spin("A", "tritium", 0.0, 1.0)
        with pytest.raises(ValueError, match="positive"):
            Spin("A", "proton", 0.0, 0.0)
        with pytest.raises(ValueError, match="non-empty"):
            Spin("", "proton", 0.0, 1.0)

    def test_system_checks(self):
        a = Spin("A", "proton", 0.0, 1.0)
        b = Spin("B", "proton", 1.0, 1.0)
        with pytest.raises(ValueError, match="at least one"):
            SpinSystem(())
        with pytest.raises(ValueError, match="duplicate"):
            SpinSystem((a, a))
        with pytest.raises(ValueError, match="unknown spin"):
            SpinSystem((a, b), {("A", "Q"): 1.0})
        with pytest.raises(ValueError, match="itself"):
            SpinSystem((a, b), {("A", "A"): 1.0})
        with pytest.raises(KeyError):
            SpinSystem((a, b)).index("Q")

    def test_mask_checks(self, sys7):
        with pytest.raises(ValueError, match="degenerate"):
            CouplingMask.of(("C1", "C1"))
        with pytest.raises(KeyError):
            CouplingMask.of(("C1", "Q9")).validate(sys7)
        mask = CouplingMask.of(("C2", "C1"))
        assert mask.contains("C1", "C2")
        assert not mask.contains("C1", "C3")


class TestThermalState:
    def test_one_weighted_z_per_spin(self, sys7):
        state = thermal_state(sys7)
        assert len(state) == 7
        for i, spin in enumerate(sys7.spins):
            term = ProductTerm.build(7, {i: "z"})
            assert state.coefficient(term) == spin.moment


class TestHamiltonian:
    def test_two_spin_diagonal_frozen(self):
        system = load_spin_system(TWO_SPIN_TEXT)
        nu1, nu2, j = 100.0, -250.0, 40.0
        # basis order |00>, |01>, |10>, |11> with +1/2 for bit 0
        expected = 2.0 * math.pi * np.array(
            [
                0.5 * nu1 + 0.5 * nu2 + 0.25 * j,
                0.5 * nu1 - 0.5 * nu2 - 0.25 * j,
                -0.5 * nu1 + 0.5 * nu2 - 0.25 * j,
                -0.5 * nu1 - 0.5 * nu2 + 0.25 * j,
            ]
        )
        assert_allclose(hamiltonian_diagonal(system), expected, atol=1e-12)
        assert_allclose(free_hamiltonian(system), np.diag(expected), atol=1e-12)

    def test_mask_limits_couplings(self, sys7):
        nothing = hamiltonian_diagonal(sys7, CouplingMask.none(), include_offsets=False)
        assert_allclose(nothing, np.zeros(2**7))
        only_pair = hamiltonian_diagonal(
            sys7, CouplingMask.of(("C1", "C2")), include_offsets=False
        )
        # coupling term magnitude is 2*pi*J/4 on every basis state
        assert_allclose(np.abs(only_pair), 2.0 * math.pi * 41.6 / 4.0)

    def test_all_pairs_matches_default(self, sys7):
        assert_allclose(
            hamiltonian_diagonal(sys7, CouplingMask.all_pairs(sys7)),
            hamiltonian_diagonal(sys7),
        )

    def test_offsets_toggle(self):
        system = load_spin_system(TWO_SPIN_TEXT)
        with_offsets = hamiltonian_diagonal(system)
        without = hamiltonian_diagonal(system, include_offsets=False)
        zeeman = with_offsets - without
        assert zeeman[0] == pytest.approx(2.0 * math.pi * (50.0 - 125.0))
