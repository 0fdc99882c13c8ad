#include <stdlib.h>

char *alloc_records(unsigned int count, unsigned int rec_size) {
  unsigned int total = count * rec_size;
  char *out = malloc(total);
  return out;
}

int *alloc_table(unsigned int entries) {
  if (entries > 1024) return NULL;
  unsigned int bytes = entries * sizeof(int);
  return malloc(bytes);
}
