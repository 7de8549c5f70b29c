#include <stdio.h>
#include <math.h>
#include "volterra_sweep.h"

int main(void) {
    VsScenario *scenario = NULL;
    if (vs_scenario_builtin("moving-half-line", &scenario) != VS_STATUS_OK) {
        return 10;
    }
    VsTrajectory *traj = NULL;
    if (vs_solve(scenario, VS_SCHEME_CATCHING_UP, 8, &traj) != VS_STATUS_OK) {
        return 11;
    }
    size_t n = vs_trajectory_len(traj);
    for (size_t k = 0; k < n; ++k) {
        double t = 0.0, x = 0.0;
        if (vs_trajectory_node(traj, k, &t, &x, 1) != VS_STATUS_OK) {
            return 12;
        }
        if (fabs(x - t) > 1e-12) {
            return 13;
        }
    }
    VsScenario *bad = NULL;
    if (vs_scenario_from_toml("name = 1", &bad) != VS_STATUS_PARSE) {
        return 14;
    }
    char msg[256];
    if (vs_last_error_message(msg, sizeof msg) == 0) {
        return 15;
    }
    printf("%zu nodes, version %s\n", n, vs_version());
    vs_trajectory_free(traj);
    vs_scenario_free(scenario);
    return 0;
}
