/* tests/c_header_check.c */

/* Copyright 2025  vTAD Toolkit Authors */

/* Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *  http://www.apache.org/licenses/LICENSE-2.0
 *
 * THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
 * KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
 * WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
 * MERCHANTABLITY OR NON-INFRINGEMENT.
 * See the Apache 2 License for the specific language governing permissions and
 * limitations under the License.
 */

/* Compiles as plain C11 and drives a few calls: proves the public header is
 * consumable without a C++ toolchain. */

#include <math.h>
#include <stdio.h>
#include <string.h>

#include "vtad.h"

int main(void) {
  if (strlen(vtad_version()) == 0) {
    fprintf(stderr, "empty version string\n");
    return 1;
  }
  if (strcmp(vtad_status_name(VTAD_OK), "Ok") != 0) {
    fprintf(stderr, "bad status name\n");
    return 1;
  }

  {
    const double scores[6] = {0.9, 0.8, 0.3, 0.7, 0.2, 0.1};
    const int labels[6] = {1, 1, 1, 0, 0, 0};
    double eer = -1.0;
    if (vtad_compute_eer(scores, labels, 6, &eer) != VTAD_OK) {
      fprintf(stderr, "eer failed: %s\n", vtad_last_error());
      return 1;
    }
    if (fabs(eer - 1.0 / 3.0) > 1e-12) {
      fprintf(stderr, "eer mismatch: %f\n", eer);
      return 1;
    }
  }

  {
    vtad_config* config = NULL;
    const char* overrides[1];
    char* digest = NULL;
    overrides[0] = "seed=123";
    if (vtad_config_open(NULL, overrides, 1, &config) != VTAD_OK) {
      fprintf(stderr, "config open failed: %s\n", vtad_last_error());
      return 1;
    }
    if (vtad_config_digest(config, &digest) != VTAD_OK) {
      fprintf(stderr, "digest failed\n");
      return 1;
    }
    vtad_string_free(digest);
    vtad_config_free(config);
  }

  printf("c header check ok\n");
  return 0;
}
