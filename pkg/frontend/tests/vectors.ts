/**
 * Cross-implementation parity vectors, generated once against the ledger's
 * canonical serialization and Ed25519 signing. If any of these drift, the
 * browser would sign bytes the chain rejects.
 */

export const SEED_HEX = "000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f";
export const PUBLIC_KEY_HEX = "03a107bff3ce10be1d70dd18e74bc09967e4d6309ba50d5f1ddc8664125531b8";
export const MESSAGE = "parity check message";
export const SIGNATURE_HEX =
  "9a95b82c7d0b8840639dfe8952b3558df72abebe58c1876d702105d48be2ee385c1f237cf57369670c54761ad48577c8645985d874abd09f95442dcd63db960d";

export const RECORD = {
  id: "1111111111111111111111111111111111111111111111111111111111111111",
  creator: "2222222222222222222222222222222222222222",
  dsc: "Mirai-style DDoS from cam-1",
  tm: 1750000100,
  own: "3333333333333333333333333333333333333333",
  own_prev: "2222222222222222222222222222222222222222",
  device_type: "camera",
  custody_times: [
    { owner: "2222222222222222222222222222222222222222", start: 1750000100, end: 1750000200, open: false },
    { owner: "3333333333333333333333333333333333333333", start: 1750000200, end: null, open: true },
  ],
};

export const RECORD_BYTES_HEX =
  "0000002011111111111111111111111111111111111111111111111111111111111111110000001422222222222222222222222222222222222222220000001b4d697261692d7374796c652044446f532066726f6d2063616d2d310000000800000000684ee1e40000001433333333333333333333333333333333333333330000001422222222222222222222222222222222222222220000000663616d65726100000084000000020000003c0000001422222222222222222222222222222222222222220000000800000000684ee1e40000000800000000000000010000000800000000684ee2480000003c0000001433333333333333333333333333333333333333330000000800000000684ee248000000080000000000000000000000080000000000000000";

export const TX_SIGNING_BYTES_HEX =
  "000000085452414e53464552000001290000002011111111111111111111111111111111111111111111111111111111111111110000001422222222222222222222222222222222222222220000001b4d697261692d7374796c652044446f532066726f6d2063616d2d310000000800000000684ee1e40000001433333333333333333333333333333333333333330000001422222222222222222222222222222222222222220000000663616d65726100000084000000020000003c0000001422222222222222222222222222222222222222220000000800000000684ee1e40000000800000000000000010000000800000000684ee2480000003c0000001433333333333333333333333333333333333333330000000800000000684ee248000000080000000000000000000000080000000000000000";

export const TX_BYTES_HEX =
  TX_SIGNING_BYTES_HEX +
  "000000142222222222222222222222222222222222222222000000407e5551240009b98e029e822eaea26c2e1a3e1c08932faffe6f7bbd94b552d78a476896c693db4b9bfaacdda8c89e77246084b36189c79ca4bce30b9e6f915902";

export const TX_ID_HEX = "d73db73f0e059a13a69098e10bd6aacc92b2b2d74156f185e85424ef5f77b4dc";
