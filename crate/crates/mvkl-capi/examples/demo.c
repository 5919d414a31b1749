/* End-to-end use of the C interface: fit, inspect, predict, save/load,
 * causal-graph inference, and the uniform complexity bound.
 *
 * Build from the repository root:
 *   cargo build -p mvkl-capi --release
 *   cc -std=c99 -Wall -I crates/mvkl-capi/include \
 *      crates/mvkl-capi/examples/demo.c \
 *      target/release/libmvkl_capi.a -lm -lpthread -ldl -o demo
 */
#include <stdio.h>
#include <stdlib.h>
#include <math.h>
#include "mvkl.h"

static int check(MvklStatus st, const char *what) {
    if (st != MVKL_STATUS_OK) {
        fprintf(stderr, "%s failed: %s\n", what, mvkl_last_error_message());
        return 1;
    }
    return 0;
}

int main(void) {
    printf("mvkl %s\n", mvkl_version());

    /* --- regression: one feature, two outputs ------------------------- */
    enum { ROWS = 32 };
    double x[ROWS], y[2 * ROWS];
    for (int i = 0; i < ROWS; i++) {
        x[i] = i / (double)ROWS * 4.0 - 2.0;
        y[2 * i] = sin(1.2 * x[i]);
        y[2 * i + 1] = 0.5 * x[i];
    }

    MvklFitOptions opts;
    mvkl_fit_options_default(&opts);
    opts.lambda = 1e-2;
    opts.tau = 2.0;

    double grid[] = {0.5, 1.0, 2.0};
    MvklModel *model = NULL;
    if (check(mvkl_fit(x, ROWS, 1, y, 2, MVKL_KERNEL_KIND_GAUSSIAN,
                       grid, 3, &opts, &model), "fit"))
        return 1;

    size_t kernels = mvkl_model_kernel_count(model);
    double *weights = malloc(kernels * sizeof *weights);
    mvkl_model_weights(model, weights, kernels);
    printf("fitted %zu kernels, weights:", kernels);
    for (size_t j = 0; j < kernels; j++) printf(" %.4f", weights[j]);
    printf("\n");
    free(weights);

    double x_new[] = {0.3, -1.1}, pred[4];
    if (check(mvkl_model_predict(model, x_new, 2, 1, pred, 4), "predict"))
        return 1;
    printf("prediction at 0.3:  [%+.4f %+.4f]\n", pred[0], pred[1]);
    printf("prediction at -1.1: [%+.4f %+.4f]\n", pred[2], pred[3]);

    /* --- persistence --------------------------------------------------- */
    if (check(mvkl_model_save_json(model, "demo_model.json"), "save"))
        return 1;
    MvklModel *loaded = NULL;
    if (check(mvkl_model_load_json("demo_model.json", &loaded), "load"))
        return 1;
    double again[4];
    mvkl_model_predict(loaded, x_new, 2, 1, again, 4);
    printf("round trip drift:   %.1e\n", fabs(pred[0] - again[0]));
    mvkl_model_free(loaded);
    mvkl_model_free(model);
    remove("demo_model.json");

    /* --- causal graph: node 1 drives node 2 --------------------------- */
    enum { STEPS = 200 };
    static double panel[STEPS * 2];
    unsigned state = 12345;
    for (int t = 1; t < STEPS; t++) {
        /* cheap uniform noise in [-1, 1] */
        state = state * 1103515245u + 12345u;
        double u1 = (state >> 16 & 0x7fff) / 16383.5 - 1.0;
        state = state * 1103515245u + 12345u;
        double u2 = (state >> 16 & 0x7fff) / 16383.5 - 1.0;
        panel[t * 2] = 0.9 * panel[(t - 1) * 2] + 0.3 * u1;
        panel[t * 2 + 1] = 0.9 * panel[(t - 1) * 2] + 0.05 * u2;
    }
    size_t dims[] = {1, 1};
    const char *names[] = {"driver", "driven"};
    opts.lambda = 3e-2;
    MvklGraph *graph = NULL;
    if (check(mvkl_granger(panel, STEPS, 2, dims, 2, names, 2,
                           MVKL_KERNEL_KIND_LINEAR, NULL, 0, &opts, &graph),
              "granger"))
        return 1;
    size_t n = mvkl_graph_node_count(graph);
    double *adj = malloc(n * n * sizeof *adj);
    mvkl_graph_adjacency(graph, adj, n * n);
    for (size_t i = 0; i < n; i++)
        for (size_t j = 0; j < n; j++)
            if (adj[i * n + j] > 1e-3)
                printf("edge %s -> %s: %.4f\n",
                       mvkl_graph_node_name(graph, j),
                       mvkl_graph_node_name(graph, i),
                       adj[i * n + j]);
    free(adj);
    mvkl_graph_free(graph);

    /* --- complexity bound ---------------------------------------------- */
    double bound = 0.0;
    mvkl_rademacher_bound(1.0, 1, 1.0, 1.0, 1, 1.0, 0, &bound);
    printf("unit single-kernel complexity bound: %.15f\n", bound);
    return 0;
}
