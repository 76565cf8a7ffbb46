package org.example.sms;

import android.database.Cursor;
import android.database.sqlite.SQLiteDatabase;

public class LostReferenceRequery {
    private SQLiteDatabase db;

    int unread(long thread) {
        Cursor cur = db.query("messages", null, "thread = " + thread, null, null, null, null);
        cur = db.query("messages", null, "thread = " + thread + " AND read = 0", null, null, null, null); // LEAK: lost_reference
        int n = cur.getCount();
        cur.close();
        return n;
    }
}
