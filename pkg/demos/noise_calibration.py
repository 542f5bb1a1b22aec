"""How each noise knob moves the X-coin and the f-coin at p = 1/2.

The default model combines several error sources.  This
script switches them on one at a time and prints the exact head
probabilities, then the truncation gaps they imply.
"""

from dataclasses import replace
from fractions import Fraction

from quoinfactory.analysis import expected_consumption, fit_truncation_epsilon
from quoinfactory.chains import quantum_from_coins
from quoinfactory.quoin import X, Z, NoiseModel, QuoinSpec, noisy_outcome_prob

SPEC = QuoinSpec.from_p(Fraction(1, 2))


def row(label, noise):
    z = noisy_outcome_prob(SPEC, Z, noise)
    x = noisy_outcome_prob(SPEC, X, noise)
    f = quantum_from_coins(str(z), str(x)).head
    cost = expected_consumption(Fraction(1, 2), True, noise)
    print(f"{label:<22}{float(x):>10.5f}{float(f):>10.5f}{fit_truncation_epsilon(float(f)):>9.4f}"
          f"{float(cost):>9.3f}")


def main():
    ideal = NoiseModel.ideal()
    full = NoiseModel()
    print(f"{'noise':<22}{'q':>10}{'f':>10}{'gap':>9}{'cost':>9}")
    row("ideal", ideal)
    row("preparation only", replace(ideal, purify_residual=full.purify_residual))
    row("gate only", replace(ideal, gate_error=full.gate_error))
    row("readout only", replace(ideal, readout_f0=full.readout_f0, readout_f1=full.readout_f1))
    row("default", full)
    row("no purification", replace(full, purification_enabled=False))


if __name__ == "__main__":
    main()
