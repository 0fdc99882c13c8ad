#include <stdlib.h>
int run(int flag) {
  char *p = malloc(16);
  if (!p) return -1;
  if (flag) { free(p); return -2; }
  free(p);
  return 0;
}
