#include <stdlib.h>
#include <string.h>
void copy(const char *s) {
  char *t = malloc(strlen(s) + 1);
  if (!t) return;
  strcpy(t, s);
  free(t);
}
