#pragma once

// Explicit parametric sufficient conditions for linear stability of the
// steady-state orbit: an AC-side power-factor condition per converter and a
// network-level DC damping condition.

#include "convsync/linearize.hpp"

#include <string>
#include <vector>

namespace convsync {

struct PowerQuantities {
    double p_x = 0.0;           // (1/2) v_dc* mu r^T i*
    double q_x = 0.0;           // (1/2) v_dc* mu r^T J^T i*
    double power_factor = 0.0;  // p_x / sqrt(p_x^2 + q_x^2)
};

/// k is 0-based.
PowerQuantities power_quantities(const SteadyState& ss, const NetworkSpec& spec, int k);

struct GainAlpha {
    double gain_y = 0.0;      // (mu v_dc* / 2L) sup ||(j w I - F)^{-1}||
    bool y_feasible = false;  // gain_y < 1
    double alpha_r = 0.0;     // mu^2 v_dc*^2 / (16 R)
    double alpha_y = 0.0;     // mu v_dc*^2 / (4 sqrt(gain_y^-2 - 1)), NaN if gain_y >= 1
    double alpha = 0.0;       // max of the two, NaN if gain_y >= 1
};

/// Alpha branches for a given gain.
GainAlpha alpha_from_gain(double gain_y, const ConverterParams& c);

/// F = A22 + A21 P1 A12 with P1 solving P1 A11 + A11^T P1 = -I. Throws
/// AssumptionError "a11-hurwitz" if A11 is not Hurwitz, "small-gain" if F
/// is not.
GainAlpha gain_and_alpha(const LinearizedSystem& lin, const NetworkSpec& spec);

struct AcVerdict {
    bool ok = false;            // P > 0, Q > 0 and the power-factor inequality
    double margin = 0.0;        // RHS - LHS of the power-factor inequality
    bool ok_q_form = false;     // Q > alpha
    double margin_q_form = 0.0; // Q - alpha
    bool forms_agree = true;
    std::string cause;          // empty when ok
};

AcVerdict check_ac(const PowerQuantities& pq, double alpha);

struct DcVerdict {
    bool feasible = false;   // gain_y < 1 and positive radicand
    double radicand = 0.0;
    double lhs = 0.0;        // worst case over converters
    double margin = 0.0;     // k_p - lhs
    bool ok = false;
    double q_bound = 0.0;    // Q_x,k must exceed this for a positive radicand
    std::string cause;
};

/// q_x: reactive quantities of all converters.
DcVerdict check_dc(const std::vector<double>& q_x, double gain_y, const ConverterParams& c);

struct ConditionReport {
    std::vector<PowerQuantities> converters;
    std::vector<AcVerdict> ac;
    GainAlpha gain;
    std::string gain_error;  // set when F could not be formed
    DcVerdict dc;
    bool all_satisfied = false;
    bool forms_disagree = false;
    std::vector<std::string> failures;  // named causes
};

ConditionReport evaluate_conditions(const SteadyState& ss, const LinearizedSystem& lin, const NetworkSpec& spec);

}  // namespace convsync
