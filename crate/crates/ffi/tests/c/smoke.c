#include <math.h>
#include <stdio.h>
#include "qsfuse.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "failed: %s (line %d)\n", #cond, __LINE__); return 1; } } while (0)

int main(void) {
    double lb = 0.0;
    CHECK(qs_to_pounds(80.0, QS_UNIT_KG, &lb) == QS_STATUS_OK);
    CHECK(fabs(lb - 176.369809748) < 1e-6);
    CHECK(qs_to_pounds(-1.0, QS_UNIT_KG, &lb) != QS_STATUS_OK);
    CHECK(qs_last_error() != NULL);

    double v = 0.0;
    QsUnit u;
    CHECK(qs_parse_weighin("I just weighed in at 181.2 lbs", &v, &u) == QS_STATUS_OK);
    CHECK(v == 181.2 && u == QS_UNIT_LB);

    QsSeries *s = NULL;
    CHECK(qs_series_new("u1", &s) == QS_STATUS_OK);
    CHECK(qs_series_push(s, 0, 150.0) == QS_STATUS_OK);
    CHECK(qs_series_push(s, 1, 151.0) == QS_STATUS_OK);
    size_t n = 99;
    CHECK(qs_series_violations(s, &n) == QS_STATUS_OK && n == 0);
    double ref = 0.0;
    CHECK(qs_series_reference_weight(s, &ref) == QS_STATUS_OK && ref == 150.5);
    qs_series_free(s);

    double x[] = {0.0, 1.0, 2.0, 3.0};
    double y[] = {1.0, 3.0, 5.0, 7.0};
    QsModel *m = NULL;
    CHECK(qs_gp_fit(x, 4, 1, y, 1.0, 0.01, false, &m) == QS_STATUS_OK);
    double p[4];
    CHECK(qs_model_predict(m, x, 4, 1, p) == QS_STATUS_OK);
    CHECK(fabs(p[2] - 5.0) < 0.5);
    CHECK(qs_model_predict(m, x, 2, 2, p) == QS_STATUS_ERR_INVALID_ARGUMENT);
    qs_model_free(m);

    QsMetrics met;
    CHECK(qs_metrics(y, y, 4, &met) == QS_STATUS_OK);
    CHECK(met.r_defined && met.r == 1.0 && met.mae == 0.0 && met.rmse == 0.0);
    printf("ok %s\n", qs_version());
    return 0;
}
