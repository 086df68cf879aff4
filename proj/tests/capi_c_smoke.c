/* The public header must compile as C and the library must work without C++. */
#include "trf/trf.h"

#include <math.h>
#include <stdio.h>

static int identity(const double* w, double* y, void* user) {
  (void)user;
  y[0] = w[0];
  return 0;
}

/* (w - 1)^2 + (y - 1)^2 */
static int objective(const double* x, double* f, double* grad, void* user) {
  (void)user;
  *f = (x[0] - 1.0) * (x[0] - 1.0) + (x[1] - 1.0) * (x[1] - 1.0);
  if (grad) {
    grad[0] = 2.0 * (x[0] - 1.0);
    grad[1] = 2.0 * (x[1] - 1.0);
  }
  return 0;
}

int main(void) {
  trf_problem* p = NULL;
  trf_config* c = NULL;
  trf_report* r = NULL;
  int failed = 1;
  if (trf_problem_create(1, 1, 0, identity, NULL, &p) != TRF_OK) goto done;
  if (trf_problem_set_objective(p, objective, NULL) != TRF_OK) goto done;
  if (trf_config_create("A1", "l", &c) != TRF_OK) goto done;
  if (trf_solve(p, c, &r) != TRF_OK) goto done;
  printf("%s f=%g iterations=%d\n", trf_report_status_name(r), trf_report_f(r), trf_report_iterations(r));
  failed = !(fabs(trf_report_f(r)) <= 1e-8 && trf_report_status(r) == TRF_CRITICAL_POINT);
done:
  if (failed) fprintf(stderr, "failed: %s\n", trf_last_error());
  trf_report_free(r);
  trf_config_free(c);
  trf_problem_free(p);
  return failed;
}
