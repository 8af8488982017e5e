#include <stdio.h>
#include "wsvd.h"

int main(int argc, char **argv) {
    if (argc != 2) return 64;
    WsvdDataset *ds = NULL;
    if (wsvd_dataset_load(argv[1], "ml100k", &ds) != WSVD_STATUS_OK) {
        fprintf(stderr, "%s\n", wsvd_last_error());
        return 1;
    }
    WsvdHyperParams hp;
    wsvd_hyperparams_default(WSVD_MODEL_KIND_WSVD, &hp);
    hp.k = 2;
    hp.epochs = 3;
    WsvdModel *model = NULL;
    if (wsvd_train(WSVD_MODEL_KIND_WSVD, ds, &hp, &model) != WSVD_STATUS_OK) return 2;
    double r = 0.0;
    if (wsvd_model_predict(model, "1", "10", &r) != WSVD_STATUS_OK) return 3;
    printf("%zu %.6f\n", wsvd_param_count(WSVD_MODEL_KIND_WSVD, 943, 1682, 15), r);
    wsvd_model_free(model);
    wsvd_dataset_free(ds);
    return 0;
}
