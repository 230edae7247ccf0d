#include <stdio.h>
#include <string.h>

#include "netar.h"

int main(void) {
    NetarScenario *s = NULL;
    if (netar_scenario_from_json("{\"kind\": \"example1\"}", &s) != NETAR_STATUS_OK) {
        fprintf(stderr, "scenario: %s\n", netar_last_error());
        return 1;
    }
    NetarPath *p = NULL;
    if (netar_scenario_simulate(s, 200, 100, 7, 0, &p) != NETAR_STATUS_OK) {
        fprintf(stderr, "simulate: %s\n", netar_last_error());
        return 1;
    }
    size_t d = 0, n = 0;
    netar_path_shape(p, &d, &n);
    double x[4 * 200];
    double ads[16 * 200];
    netar_path_series(p, x, 4 * 200);
    netar_path_networks(p, ads, 16 * 200);

    NetarFit *fit = NULL;
    if (netar_fit(x, d, n, ads, n - 1, "{\"family\": \"var\", \"order\": 1}", 3, &fit) != NETAR_STATUS_OK) {
        fprintf(stderr, "fit: %s\n", netar_last_error());
        return 1;
    }
    double fc[4 * 2];
    if (netar_forecast(fit, x, d, n, NULL, 0, "{\"kind\": \"hold_last\"}", 2, fc, 8) != NETAR_STATUS_OK) {
        fprintf(stderr, "forecast: %s\n", netar_last_error());
        return 1;
    }
    double small[1];
    enum NetarStatus st = netar_path_series(p, small, 1);
    printf("d=%zu n=%zu order=%zu fc0=%.3f small=%d version=%s\n", d, n, netar_fit_order(fit), fc[0], (int)st,
           netar_version());
    netar_fit_free(fit);
    netar_path_free(p);
    netar_scenario_free(s);
    return st == NETAR_STATUS_BUFFER_TOO_SMALL ? 0 : 2;
}
