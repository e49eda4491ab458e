/* C interface for the attgt staggered difference-in-differences toolkit.
 *
 * Workflow: load or generate a panel into an attgt_dataset, run an
 * estimator against it with a JSON configuration, then read the result
 * back as a JSON document.
 *
 * Conventions:
 *   - All strings are NUL-terminated UTF-8.
 *   - Functions returning a pointer return NULL on failure; query
 *     attgt_last_error_code / attgt_last_error_message afterwards. Both
 *     report the most recent failure on the calling thread.
 *   - Strings returned as char* are owned by the caller and must be
 *     released with attgt_string_free. attgt_version is the exception:
 *     it returns static storage.
 *   - Error codes match the CLI exit codes:
 *       2  invalid configuration or specification
 *       3  input data problem (missing file, bad column, parse failure)
 *       4  estimation failure (no controls, collinearity, too few
 *          clusters, non-convergence)
 *       5  incompatible runs
 */

#ifndef ATTGT_H
#define ATTGT_H

#ifdef __cplusplus
extern "C" {
#endif

/* Opaque panel handle. */
typedef struct AttgtDataset AttgtDataset;

/* Opaque result handle wrapping one JSON document. */
typedef struct AttgtResult AttgtResult;

/* Library version, e.g. "0.1.0". Static storage; never free it. */
const char *attgt_version(void);

/* Error code of the most recent failed call on this thread, or 0. */
int attgt_last_error_code(void);

/* Message of the most recent failed call on this thread, or NULL when no
 * failure is pending. Release with attgt_string_free. */
char *attgt_last_error_message(void);

/* Release a string returned by this library. NULL is a no-op. */
void attgt_string_free(char *s);

/* Load a panel from a CSV file. schema_json maps columns, for example
 *   {"unit":"id","period":"year","first_treat":"adopted","outcome":"y"}
 * with optional "weight", "cluster", "covariates" (array of column
 * names), and "never_sentinel" keys. Pass NULL for the default layout
 * (unit, period, first_treat, outcome, weight, cluster; empty
 * first_treat means never treated). */
AttgtDataset *attgt_dataset_load_csv(const char *path, const char *schema_json);

/* Generate a synthetic panel from a JSON generator specification. */
AttgtDataset *attgt_dataset_generate(const char *spec_json);

/* Release a dataset handle. NULL is a no-op. */
void attgt_dataset_free(AttgtDataset *ds);

/* True-effect summary implied by a generator specification, as a JSON
 * document {"att": [...], "group": {...}, "overall": x, "event": {...}}.
 * Release with attgt_string_free. */
char *attgt_truth_json(const char *spec_json);

/* Estimate group-time average treatment effects, aggregate them overall,
 * by group, and by event time, and attach multiplier-bootstrap bands.
 * config_json is a design configuration document, for example
 *   {"control_mode":"not_yet_treated","anticipation":0,
 *    "conditional":false,"event_window":[-5,5],
 *    "bootstrap":{"n_draws":999,"seed":1,"alpha":0.05}}
 * Pass NULL for defaults. */
AttgtResult *attgt_estimate(const AttgtDataset *ds, const char *config_json);

/* Pooled two-way fixed-effects benchmark with its implicit cell weights
 * and, when the panel is balanced with time-constant weights, the
 * timing-group decomposition of the pooled coefficient. */
AttgtResult *attgt_diagnose(const AttgtDataset *ds);

/* Imputation cross-check: fit unit and period effects on untreated
 * cells, impute treated counterfactuals, and report overall, event, and
 * pre-trend placebo summaries. Uses the event window and bootstrap
 * settings from config_json (NULL for defaults). */
AttgtResult *attgt_impute(const AttgtDataset *ds, const char *config_json);

/* Serialize a result handle as JSON. Release with attgt_string_free. */
char *attgt_result_json(const AttgtResult *res);

/* Release a result handle. NULL is a no-op. */
void attgt_result_free(AttgtResult *res);

#ifdef __cplusplus
}
#endif

#endif /* ATTGT_H */
