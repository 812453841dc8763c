#include <math.h>
#include <stdio.h>
#include <string.h>
#include "twtsim.h"

#define CHECK(x) do { if (!(x)) { fprintf(stderr, "failed: %s (%s)\n", #x, twtsim_last_error()); return 1; } } while (0)

int main(void) {
    TwtsimScenario *s = NULL;
    CHECK(twtsim_scenario_from_toml("access = \"twt\"\nload_mbps = 2.0", &s) == TWTSIM_STATUS_OK);
    CHECK(twtsim_scenario_set_duration(s, 1.0) == TWTSIM_STATUS_OK);
    TwtsimReport *r = NULL;
    CHECK(twtsim_run(s, &r) == TWTSIM_STATUS_OK);
    TwtsimSummary sum;
    CHECK(twtsim_report_summary(r, &sum) == TWTSIM_STATUS_OK);
    CHECK(sum.delivered > 0 && !isnan(sum.mean_delay_us));
    char *json = twtsim_report_json(r);
    CHECK(json != NULL && strstr(json, "\"metrics\"") != NULL);
    twtsim_string_free(json);
    twtsim_report_free(r);
    twtsim_scenario_free(s);

    CHECK(twtsim_scenario_preset("missing", &s) == TWTSIM_STATUS_CONFIG_INVALID);
    uint64_t n = 0;
    CHECK(twtsim_overhead_messages(TWTSIM_OVERHEAD_MODE_INDIVIDUAL_APERIODIC, 10, 100, &n) == TWTSIM_STATUS_OK);
    CHECK(n == 1020);
    printf("delay %.1f us, %llu delivered\n", sum.mean_delay_us, (unsigned long long)sum.delivered);
    return 0;
}
