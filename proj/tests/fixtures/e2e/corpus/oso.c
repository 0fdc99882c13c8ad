#define HDR_LEN 16

static int read_byte(const char *buf, int off) {
  return buf[off];
}

int parse_header(const char *packet, int hdr_len) {
  char header[HDR_LEN];
  for (int i = 0; i < HDR_LEN; i++) header[i] = packet[i];
  int version = read_byte(header, hdr_len);
  return version;
}

int peek_checked(const char *buf, int off) {
  if (off < 0 || off >= HDR_LEN) return -1;
  return buf[off];
}
