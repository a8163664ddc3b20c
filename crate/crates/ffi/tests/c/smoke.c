#include <math.h>
#include <stdio.h>
#include <string.h>

#include "privfair.h"

#define CHECK(cond)                                                  \
    do {                                                             \
        if (!(cond)) {                                               \
            fprintf(stderr, "line %d: %s\n", __LINE__, #cond);       \
            return 1;                                                \
        }                                                            \
    } while (0)

int main(void) {
    double sigma = 0.0;
    CHECK(pf_calibrate_sigma(0.0, 0.05, 1.0, &sigma) == PF_STATUS_OK);
    CHECK(fabs(sigma - 7.973619701) < 1e-8);
    CHECK(pf_calibrate_sigma(1.0, 0.0, 1.0, &sigma) == PF_STATUS_DOMAIN);
    CHECK(pf_last_error_message() != NULL);

    const double w[3] = {1.0, 0.3, -0.1};
    PfModel *model = NULL;
    PfNoise *noise = NULL;
    PfDataset *data = NULL;
    CHECK(pf_model_new(w, 3, &model) == PF_STATUS_OK);
    CHECK(pf_noise_isotropic(0.5, 3, &noise) == PF_STATUS_OK);
    CHECK(pf_dataset_synthetic(100, 2, 0.5, 1.0, 1, &data) == PF_STATUS_OK);

    double lower = 0.0, upper = 0.0, acc = 0.0;
    CHECK(pf_norm_bounds(model, noise, 0.1, &lower, &upper) == PF_STATUS_OK);
    CHECK(lower <= upper);
    CHECK(pf_expected_accuracy(model, noise, data, &acc) == PF_STATUS_OK);
    CHECK(acc > 0.0 && acc < 1.0);

    const double zeta = 0.1;
    char *json = NULL;
    CHECK(pf_audit_json(model, noise, data, &zeta, 1, &json) == PF_STATUS_OK);
    CHECK(strstr(json, "demographic_parity") != NULL);
    pf_string_free(json);

    pf_dataset_free(data);
    pf_noise_free(noise);
    pf_model_free(model);
    printf("ok %s\n", pf_version());
    return 0;
}
