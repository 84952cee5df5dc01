#include <math.h>
#include <stdio.h>
#include <string.h>

#include "sgdm_lab.h"

#define CHECK(cond)                                                      \
    do {                                                                 \
        if (!(cond)) {                                                   \
            fprintf(stderr, "line %d: %s (%s)\n", __LINE__, #cond,       \
                    sgdm_last_error());                                  \
            return 1;                                                    \
        }                                                                \
    } while (0)

int main(void) {
    double a[4] = {2.0, 0.0, 0.0, 1.0};
    SgdmObjective *obj = NULL;
    CHECK(sgdm_objective_quadratic(a, 2, &obj) == SGDM_STATUS_OK);

    size_t dim = 0;
    double lip = 0.0, fstar = 1.0;
    CHECK(sgdm_objective_info(obj, &dim, &lip, &fstar) == SGDM_STATUS_OK);
    CHECK(dim == 2 && fabs(lip - 2.0) < 1e-12 && fstar == 0.0);

    double x[2] = {1.0, 1.0}, f = 0.0;
    CHECK(sgdm_objective_eval(obj, x, 2, &f) == SGDM_STATUS_OK);
    CHECK(fabs(f - 1.5) < 1e-15);

    SgdmSchedule *sched = NULL;
    CHECK(sgdm_schedule_new(SGDM_SCHEDULE_KIND_ANYTIME_LOG2, 1.0, 0.0, lip, &sched) == SGDM_STATUS_OK);

    SgdmTrajectory *traj = NULL;
    CHECK(sgdm_trajectory_run(obj, SGDM_NOISE_KIND_GAUSSIAN, 1.0, SGDM_ALGORITHM_SGDM, sched, 200, 7, &traj) ==
          SGDM_STATUS_OK);
    size_t len = 0;
    CHECK(sgdm_trajectory_len(traj, &len) == SGDM_STATUS_OK && len == 200);
    double res = 1.0;
    size_t viol = 1;
    CHECK(sgdm_trajectory_check_descent(traj, &res, &viol) == SGDM_STATUS_OK);
    CHECK(viol == 0 && res <= 1e-10);

    double small[3];
    CHECK(sgdm_trajectory_f_gaps(traj, small, 3) == SGDM_STATUS_BUFFER_TOO_SMALL);
    CHECK(strlen(sgdm_last_error()) > 0);

    CHECK(sgdm_objective_eval(obj, x, 3, &f) == SGDM_STATUS_DIMENSION_MISMATCH);
    CHECK(sgdm_objective_eval(NULL, x, 2, &f) == SGDM_STATUS_NULL_POINTER);

    sgdm_trajectory_free(traj);
    sgdm_schedule_free(sched);
    sgdm_objective_free(obj);
    sgdm_objective_free(NULL);
    printf("ok %s\n", sgdm_version());
    return 0;
}
