#pragma once

// Per-criterion decision record. `margin` is the signed distance from the
// decision boundary in the criterion's native units (value - boundary), so
// recurrence corresponds to margin <= 0 up to the decision tolerance.

#include <map>
#include <string>
#include <vector>

namespace lamperti {

enum class Label { Recurrent, Transient, Inconclusive };

inline const char* to_string(Label label) {
    switch (label) {
        case Label::Recurrent: return "Recurrent";
        case Label::Transient: return "Transient";
        case Label::Inconclusive: return "Inconclusive";
    }
    return "Inconclusive";
}

struct Verdict {
    Label label = Label::Inconclusive;
    std::string criterion;
    double margin = 0.0;
    std::map<std::string, double> evidence;  // numeric, criterion-specific
    std::vector<std::string> notes;
};

}  // namespace lamperti
